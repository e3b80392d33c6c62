// Runs every stage from one config: simulate, unify, fit, label, filter,
// train and evaluate. Same as `weaklabel pipeline --config <file>`.

use weaklabel::evaluation::EvalReport;
use weaklabel::pipeline::{run_pipeline, Logger, PipelineConfig, REPORT_FILE};
use weaklabel::signal_store::read_json;

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let out_dir = std::env::temp_dir().join(format!("weaklabel-pipeline-{}", std::process::id()));
    let cfg: PipelineConfig = serde_json::from_value(serde_json::json!({
        "out_dir": out_dir,
        "synth": {
            "n_samples": 2000,
            "true_alpha": [0.9, 0.8, 0.7],
            "true_beta": [0.9, 0.8, 0.7],
            "feature_dim": 4,
            "seed": 1
        },
        "unify": {"p_pos": 0.3, "p_neg": 0.3},
        "filter": {"p_pos": 0.3, "p_neg": 0.3}
    }))?;
    let written = run_pipeline(&cfg, &Logger { quiet: false })?;
    let report: EvalReport = read_json(cfg.artifact_path(REPORT_FILE))?;
    println!(
        "{} artifacts, label AUC {:.4}",
        written.len(),
        report.mean_auc
    );
    std::fs::remove_dir_all(&out_dir)?;
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
