// Draws a synthetic corpus with known source accuracies and propensities
// and writes it, with its features, as JSONL.

use weaklabel::signal_store::{load_corpus, save_corpus, save_features};
use weaklabel::synth::{generate, SynthConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        n_samples: 200,
        true_alpha: vec![0.9, 0.7],
        true_beta: vec![0.8, 0.6],
        prior_pos: 0.4,
        feature_dim: 2,
        feature_noise: 0.5,
        seed: 7,
    };
    let data = generate(&cfg)?;

    let dir = std::env::temp_dir().join(format!("weaklabel-simulate-{}", std::process::id()));
    std::fs::create_dir_all(&dir)?;
    let corpus_path = dir.join("corpus.jsonl");
    save_corpus(&data.corpus, &corpus_path)?;
    save_features(&data.features, dir.join("features.jsonl"))?;

    let back = load_corpus(&corpus_path)?;
    assert_eq!(back, data.corpus);
    let positives = data.gold().iter().filter(|&&g| g == 1).count();
    println!(
        "{} samples ({positives} positive) in {}",
        back.len(),
        dir.display()
    );
    for i in 0..data.votes.n_sources() {
        println!(
            "{}: voted on {} samples",
            data.votes.sources()[i],
            data.votes.coverage(i)
        );
    }
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
