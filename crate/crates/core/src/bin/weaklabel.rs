use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use weaklabel::baselines::Method;
use weaklabel::error::{Error, Result};
use weaklabel::evaluation::labeled_scores;
use weaklabel::label_model::{FitConfig, ModelFile};
use weaklabel::pipeline::{
    classifier_scores, commit, eval_stage, filter_stage, fit_stage, label_stage, run_pipeline,
    simulate_stage, thresholds_bytes, train_stage, unify_stage, Artifact, EvalOptions, Logger,
    PipelineConfig,
};
use weaklabel::signal_store::{load_corpus, load_features, read_json, to_json_bytes};
use weaklabel::synth::SynthConfig;
use weaklabel::training::{ClassifierFile, TrainConfig};
use weaklabel::QuantileConfig;

#[derive(Parser)]
#[command(
    name = "weaklabel",
    version,
    about = "Weak-supervision label aggregation"
)]
struct Cli {
    /// Print only the paths of written artifacts.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Copy)]
struct Masses {
    #[arg(long, default_value_t = 0.75)]
    p_pos: f64,
    #[arg(long, default_value_t = 0.25)]
    p_neg: f64,
}

impl Masses {
    fn config(self) -> Result<QuantileConfig> {
        QuantileConfig::new(self.p_pos, self.p_neg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic corpus and feature file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_corpus: PathBuf,
        #[arg(long)]
        out_features: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Map raw scores to votes with per-source quantile thresholds.
    Unify {
        #[arg(long)]
        input: PathBuf,
        #[command(flatten)]
        masses: Masses,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        emit_thresholds: Option<PathBuf>,
    },
    /// Fit the label model on a votes file.
    Fit {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long, default_value_t = 0.5)]
        prior: f64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 200)]
        max_iter: usize,
        #[arg(long)]
        output: PathBuf,
    },
    /// Attach probabilistic labels (`p_pos`) to a votes file.
    Label {
        #[arg(long)]
        votes: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value = "model")]
        method: Method,
        #[arg(long)]
        output: PathBuf,
    },
    /// Drop low-confidence labels.
    Filter {
        #[arg(long)]
        labeled: PathBuf,
        #[command(flatten)]
        masses: Masses,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train the soft-label classifier.
    Train {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        features: PathBuf,
        #[command(flatten)]
        masses: Masses,
        /// Train on every sample instead of the confidence-filtered subset.
        #[arg(long)]
        no_filter: bool,
        #[arg(long, default_value_t = TrainConfig::default().lr)]
        lr: f64,
        #[arg(long, default_value_t = TrainConfig::default().epochs)]
        epochs: usize,
        #[arg(long, default_value_t = TrainConfig::default().seed)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Score labels (or a trained classifier) against gold.
    Eval {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        report: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
        #[arg(long)]
        density: Option<PathBuf>,
        #[arg(long, default_value_t = 20)]
        density_bins: usize,
        /// Evaluate this classifier's predictions instead of `p_pos`.
        #[arg(long, requires = "features")]
        classifier: Option<PathBuf>,
        #[arg(long)]
        features: Option<PathBuf>,
    },
    /// Run every stage from one config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    method: Option<Method>,
    #[arg(long)]
    unify_p_pos: Option<f64>,
    #[arg(long)]
    unify_p_neg: Option<f64>,
    #[arg(long)]
    filter_p_pos: Option<f64>,
    #[arg(long)]
    filter_p_neg: Option<f64>,
    #[arg(long)]
    prior: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
}

impl PipelineArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = PipelineConfig::load(&self.config)?;
        // relative input paths in the config resolve against its directory
        let base = self.config.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.corpus, &mut cfg.features].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(d) = &self.out_dir {
            cfg.out_dir = d.clone();
        } else if cfg.out_dir.is_relative() {
            cfg.out_dir = base.join(&cfg.out_dir);
        }
        if let Some(s) = self.seed {
            cfg.set_seed(s);
        }
        if let Some(m) = self.method {
            cfg.method = m;
        }
        set(&mut cfg.unify.p_pos, self.unify_p_pos);
        set(&mut cfg.unify.p_neg, self.unify_p_neg);
        set(&mut cfg.filter.p_pos, self.filter_p_pos);
        set(&mut cfg.filter.p_neg, self.filter_p_neg);
        set(&mut cfg.fit.prior_pos, self.prior);
        set(&mut cfg.fit.tol, self.tol);
        set(&mut cfg.fit.max_iter, self.max_iter);
        set(&mut cfg.train.lr, self.lr);
        set(&mut cfg.train.epochs, self.epochs);
        Ok(cfg)
    }
}

fn set<T: Copy>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

fn run(cli: Cli) -> Result<()> {
    let log = Logger { quiet: cli.quiet };
    match cli.command {
        Command::Simulate {
            config,
            out_corpus,
            out_features,
            seed,
        } => {
            let mut cfg: SynthConfig = read_json(&config)?;
            set(&mut cfg.seed, seed);
            let (corpus, features) = simulate_stage(&cfg)?;
            log.info(
                "simulate",
                format!("{} samples, seed {}", corpus.len(), cfg.seed),
            );
            commit(
                &[
                    Artifact {
                        path: out_corpus,
                        bytes: corpus.to_jsonl().into_bytes(),
                    },
                    Artifact {
                        path: out_features,
                        bytes: features.to_jsonl().into_bytes(),
                    },
                ],
                "simulate",
                &log,
            )
        }
        Command::Unify {
            input,
            masses,
            output,
            emit_thresholds,
        } => {
            let corpus = load_corpus(&input)?;
            let (votes, thresholds) = unify_stage(&corpus, &masses.config()?)?;
            for (s, th) in &thresholds {
                log.info(
                    "unify",
                    format!("{s}: gamma_neg={} gamma_pos={}", th.gamma_neg, th.gamma_pos),
                );
            }
            let mut out = vec![Artifact {
                path: output,
                bytes: votes.to_jsonl().into_bytes(),
            }];
            if let Some(p) = emit_thresholds {
                out.push(Artifact {
                    path: p,
                    bytes: thresholds_bytes(&thresholds),
                });
            }
            commit(&out, "unify", &log)
        }
        Command::Fit {
            votes,
            prior,
            tol,
            max_iter,
            output,
        } => {
            let votes = load_corpus(&votes)?;
            let model = fit_stage(
                &votes,
                &FitConfig {
                    prior_pos: prior,
                    tol,
                    max_iter,
                },
            )?;
            if let Some(r) = &model.fit_report {
                log.info(
                    "fit",
                    format!(
                        "{} iterations, log-likelihood {:.6}, converged={}",
                        r.iterations, r.final_log_likelihood, r.converged
                    ),
                );
            }
            commit(
                &[Artifact {
                    path: output,
                    bytes: to_json_bytes(&model),
                }],
                "fit",
                &log,
            )
        }
        Command::Label {
            votes,
            model,
            method,
            output,
        } => {
            let votes = load_corpus(&votes)?;
            let model: Option<ModelFile> = model.map(read_json).transpose()?;
            let labeled = label_stage(&votes, method, model.as_ref())?;
            log.info(
                "label",
                format!("method={method}, {} samples", labeled.len()),
            );
            commit(
                &[Artifact {
                    path: output,
                    bytes: labeled.to_jsonl().into_bytes(),
                }],
                "label",
                &log,
            )
        }
        Command::Filter {
            labeled,
            masses,
            output,
        } => {
            let labeled = load_corpus(&labeled)?;
            let (kept, th) = filter_stage(&labeled, &masses.config()?)?;
            log.info(
                "filter",
                format!(
                    "kept {} of {} (gamma_neg={}, gamma_pos={})",
                    kept.len(),
                    labeled.len(),
                    th.gamma_neg,
                    th.gamma_pos
                ),
            );
            commit(
                &[Artifact {
                    path: output,
                    bytes: kept.to_jsonl().into_bytes(),
                }],
                "filter",
                &log,
            )
        }
        Command::Train {
            labeled,
            features,
            masses,
            no_filter,
            lr,
            epochs,
            seed,
            output,
        } => {
            let labeled = load_corpus(&labeled)?;
            let features = load_features(&features)?;
            let filter = if no_filter {
                None
            } else {
                Some(masses.config()?)
            };
            let clf = train_stage(
                &labeled,
                &features,
                filter.as_ref(),
                &TrainConfig { lr, epochs, seed },
            )?;
            log.info(
                "train",
                format!(
                    "{} samples, loss {:.6} -> {:.6}",
                    clf.n_train, clf.initial_loss, clf.final_loss
                ),
            );
            commit(
                &[Artifact {
                    path: output,
                    bytes: to_json_bytes(&clf),
                }],
                "train",
                &log,
            )
        }
        Command::Eval {
            labeled,
            report,
            bins,
            density,
            density_bins,
            classifier,
            features,
        } => {
            let corpus = load_corpus(&labeled)?;
            let scores = match (classifier, features) {
                (Some(c), Some(f)) => {
                    let clf: ClassifierFile = read_json(&c)?;
                    classifier_scores(&corpus, &load_features(&f)?, &clf)?
                }
                _ => labeled_scores(&corpus)?,
            };
            let opts = EvalOptions {
                bins,
                density_bins: density.as_ref().map(|_| density_bins),
            };
            let (rep, dens) = eval_stage(&corpus, &scores, &opts)?;
            for w in rep.warnings() {
                log.info("eval", format!("warning: {w}"));
            }
            log.info(
                "eval",
                format!("mean AUC {:.4}, variance {:.6}", rep.mean_auc, rep.variance),
            );
            let mut out = vec![Artifact {
                path: report,
                bytes: to_json_bytes(&rep),
            }];
            if let (Some(p), Some(d)) = (density, dens) {
                out.push(Artifact {
                    path: p,
                    bytes: to_json_bytes(&d),
                });
            }
            commit(&out, "eval", &log)
        }
        Command::Pipeline(args) => {
            let cfg = args.resolve()?;
            run_pipeline(&cfg, &log).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            return ExitCode::from(if usage { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        1
    } else {
        2
    }
}
