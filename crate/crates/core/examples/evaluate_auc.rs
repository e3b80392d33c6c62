// Per-dataset AUC with variance, AUC by abstractiveness bin, and a score
// density histogram.

use weaklabel::evaluation::{abstractiveness, binned_auc, density_export, eval_report};
use weaklabel::{Corpus, SampleRecord};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let rows = [
        (
            "x1",
            "summ",
            0.91,
            1,
            "the cat sat on the mat",
            "the cat sat",
        ),
        (
            "x2",
            "summ",
            0.35,
            0,
            "the cat sat on the mat",
            "a dog barked loudly",
        ),
        (
            "x3",
            "summ",
            0.62,
            1,
            "rain fell all day",
            "it rained all day",
        ),
        (
            "x4",
            "summ",
            0.66,
            0,
            "rain fell all day",
            "snow fell at night",
        ),
        ("x5", "dial", 0.80, 1, "we met at noon", "we met at noon"),
        ("x6", "dial", 0.20, 0, "we met at noon", "they never met"),
        (
            "x7",
            "dial",
            0.75,
            0,
            "prices went up",
            "prices went down sharply",
        ),
        ("x8", "dial", 0.70, 1, "prices went up", "prices rose"),
    ];
    let mut records = Vec::new();
    let mut scores = Vec::new();
    for &(id, dataset, score, gold, premise, hypothesis) in &rows {
        records.push(
            SampleRecord::new(id)
                .with_score("metric", score)
                .with_gold(gold)
                .with_dataset(dataset)
                .with_text(premise, hypothesis),
        );
        scores.push(score);
    }
    let corpus = Corpus::new(records)?;

    let report = eval_report(&corpus, &scores)?;
    for (dataset, auc) in &report.auc_by_dataset {
        println!("{dataset}: AUC {auc:.3}");
    }
    println!(
        "mean {:.3}, variance x1e4 {:.1}",
        report.mean_auc, report.variance_x1e4
    );

    println!(
        "abstractiveness of x2: {:.2}",
        abstractiveness("the cat sat on the mat", "a dog barked loudly")?
    );
    for bin in binned_auc(&corpus, &scores, 2)? {
        match (bin.abstractiveness_min, bin.abstractiveness_max, bin.auc) {
            (Some(lo), Some(hi), Some(auc)) => {
                println!("[{lo:.2}, {hi:.2}] n={} AUC {auc:.3}", bin.n)
            }
            (Some(lo), Some(hi), None) => println!("[{lo:.2}, {hi:.2}] n={} single class", bin.n),
            _ => println!("empty bin"),
        }
    }

    let hist = density_export(&scores, 5)?;
    for (edge, d) in hist.edges.windows(2).zip(&hist.densities) {
        println!("[{:.1}, {:.1}) density {d:.2}", edge[0], edge[1]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
