// Fits the generative label model by EM and checks the recovered source
// accuracies against the ones used to simulate the votes.

use weaklabel::label_model::{fit, posterior, FitConfig};
use weaklabel::synth::{generate, SynthConfig};
use weaklabel::Vote;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let truth = [0.9, 0.8, 0.7];
    let data = generate(&SynthConfig {
        n_samples: 5000,
        true_alpha: truth.to_vec(),
        true_beta: vec![0.9; 3],
        prior_pos: 0.5,
        feature_dim: 0,
        feature_noise: 1.0,
        seed: 3,
    })?;
    let (params, report) = fit(&data.votes, &FitConfig::default())?;
    println!(
        "{} EM iterations, log-likelihood {:.3}, converged={}",
        report.iterations, report.final_log_likelihood, report.converged
    );
    for (i, (a, t)) in params.alpha.iter().zip(truth).enumerate() {
        println!(
            "source {i}: accuracy {a:.3} (true {t}), propensity {:.3}",
            params.beta[i]
        );
        assert!((a - t).abs() < 0.05);
    }

    // the strongest source outvotes the two weaker ones
    let split = posterior(&[Vote::Pos, Vote::Neg, Vote::Neg], &params);
    let abstain = posterior(&[Vote::Abstain, Vote::Pos, Vote::Abstain], &params);
    println!("p(y=1 | 1,0,0) = {split:.3}, p(y=1 | -,1,-) = {abstain:.3}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
