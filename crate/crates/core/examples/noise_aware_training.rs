// Trains the soft-label classifier on model posteriors, with and without
// dropping low-confidence labels, and compares held-out AUC.

use weaklabel::evaluation::roc_auc;
use weaklabel::label_model::{fit, label_corpus, FitConfig};
use weaklabel::synth::{generate, SynthConfig};
use weaklabel::training::{build_training_set, predict, train, TrainConfig};
use weaklabel::unification::unify_corpus;
use weaklabel::QuantileConfig;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SynthConfig {
        n_samples: 800,
        true_alpha: vec![0.85, 0.8, 0.75, 0.7],
        true_beta: vec![0.7; 4],
        prior_pos: 0.5,
        feature_dim: 8,
        feature_noise: 1.5,
        seed: 21,
    };
    let data = generate(&cfg)?;
    let test = generate(&SynthConfig {
        n_samples: 2000,
        seed: 22,
        ..cfg
    })?;

    let masses = QuantileConfig::new(0.3, 0.3)?;
    let (votes, _) = unify_corpus(&data.corpus, &masses)?;
    let (params, _) = fit(&votes, &FitConfig::default())?;
    let labeled = data.corpus.with_labels(&label_corpus(&votes, &params))?;

    for (name, filter) in [("filtered", Some(&masses)), ("unfiltered", None)] {
        let (set, outcome) = build_training_set(&labeled, &data.features, filter)?;
        let (clf, trace) = train(&set, &TrainConfig::default())?;
        let scores = test
            .corpus
            .records()
            .iter()
            .map(|r| predict(&clf, test.features.get(&r.id).unwrap()))
            .collect::<Result<Vec<_>, _>>()?;
        let auc = roc_auc(&scores, &test.gold())?;
        let dropped = outcome.map_or(0, |o| labeled.len() - o.kept.len());
        println!(
            "{name}: {} samples ({dropped} dropped), loss {:.2} -> {:.2}, held-out AUC {auc:.4}",
            set.len(),
            trace[0],
            trace[trace.len() - 1]
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
