// Turns raw metric scores into {0, 1, abstain} votes with per-source
// quantile thresholds.

use weaklabel::unification::unify_corpus;
use weaklabel::{Corpus, QuantileConfig, SampleRecord};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let raw = [
        ("a", 0.92, 0.81),
        ("b", 0.15, 0.40),
        ("c", 0.55, 0.12),
        ("d", 0.71, 0.95),
        ("e", 0.08, 0.33),
        ("f", 0.44, 0.60),
    ];
    let records = raw
        .iter()
        .map(|&(id, nli, qa)| {
            SampleRecord::new(id)
                .with_score("nli", nli)
                .with_score("qa", qa)
        })
        .collect();
    let corpus = Corpus::new(records)?;

    // top and bottom third of each source vote; the middle third abstains
    let cfg = QuantileConfig::new(1.0 / 3.0, 1.0 / 3.0)?;
    let (votes, thresholds) = unify_corpus(&corpus, &cfg)?;
    for (source, th) in &thresholds {
        println!(
            "{source}: vote 0 at <= {}, vote 1 at >= {}",
            th.gamma_neg, th.gamma_pos
        );
    }
    for (id, row) in votes.sample_ids().iter().zip(votes.rows()) {
        let shown: Vec<i8> = row.iter().map(|v| v.to_i8()).collect();
        println!("{id}: {shown:?}");
    }
    assert_eq!(votes.coverage(0), 4);
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
