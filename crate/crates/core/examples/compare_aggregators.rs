// Label model vs average signal vs majority vote on sources of uneven
// quality, scored by ROC AUC against gold.

use weaklabel::baselines::{average_corpus, majority_corpus};
use weaklabel::evaluation::roc_auc;
use weaklabel::label_model::{fit, label_corpus, FitConfig};
use weaklabel::synth::{generate, SynthConfig};
use weaklabel::unification::unify_corpus;
use weaklabel::QuantileConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&SynthConfig {
        n_samples: 10_000,
        true_alpha: vec![0.9, 0.65, 0.55],
        true_beta: vec![0.9; 3],
        prior_pos: 0.5,
        feature_dim: 0,
        feature_noise: 1.0,
        seed: 0,
    })?;
    let gold = data.gold();
    let (votes, _) = unify_corpus(&data.corpus, &QuantileConfig::new(0.3, 0.3)?)?;
    let (params, _) = fit(&votes, &FitConfig::default())?;

    let model = roc_auc(&label_corpus(&votes, &params), &gold)?;
    let average = roc_auc(&average_corpus(&data.corpus)?.p_pos, &gold)?;
    let majority = roc_auc(&majority_corpus(&votes).p_pos, &gold)?;
    println!("label model {model:.4}");
    println!("average     {average:.4}");
    println!("majority    {majority:.4}");
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
