//! Stage functions behind the command-line driver.
//!
//! Every stage maps in-memory inputs to serialized artifacts. The standalone
//! subcommands and [`run_pipeline`] call the same functions, so the bytes a
//! stage produces do not depend on how it was invoked.

use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::baselines::{average_corpus, majority_corpus, Method};
use crate::error::{Error, Result};
use crate::evaluation::{
    binned_auc, density_export, eval_report, labeled_scores, EvalReport, Histogram,
};
use crate::label_model::{self, FitConfig, ModelFile};
use crate::signal_store::{
    load_corpus, load_features, read_json, to_json_bytes, write_atomic, Corpus, FeatureTable,
};
use crate::synth::{generate, SynthConfig};
use crate::training::{self, build_training_set, filter_labels, ClassifierFile, TrainConfig};
use crate::unification::{unify_corpus, QuantileConfig, SignalMatrix, SourceThresholds};

/// Line-oriented progress output. Quiet mode prints only artifact paths.
#[derive(Debug, Clone, Copy, Default)]
pub struct Logger {
    pub quiet: bool,
}

impl Logger {
    pub fn info(&self, stage: &str, msg: impl AsRef<str>) {
        if !self.quiet {
            eprintln!("[{stage}] {}", msg.as_ref());
        }
    }

    pub fn artifact(&self, stage: &str, path: &Path) {
        if self.quiet {
            println!("{}", path.display());
        } else {
            eprintln!("[{stage}] wrote {}", path.display());
        }
    }
}

/// A named output waiting to be written.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub path: PathBuf,
    pub bytes: Vec<u8>,
}

impl Artifact {
    fn new(path: impl Into<PathBuf>, bytes: Vec<u8>) -> Self {
        Artifact {
            path: path.into(),
            bytes,
        }
    }
}

/// Writes artifacts one by one, each atomically.
pub fn commit(artifacts: &[Artifact], stage: &str, log: &Logger) -> Result<()> {
    for a in artifacts {
        write_atomic(&a.path, &a.bytes)?;
        log.artifact(stage, &a.path);
    }
    Ok(())
}

pub fn simulate_stage(cfg: &SynthConfig) -> Result<(Corpus, FeatureTable)> {
    let data = generate(cfg)?;
    Ok((data.corpus, data.features))
}

/// Attaches votes to every record and returns the per-source thresholds.
pub fn unify_stage(
    corpus: &Corpus,
    cfg: &QuantileConfig,
) -> Result<(Corpus, IndexMap<String, SourceThresholds>)> {
    let (matrix, thresholds) = unify_corpus(corpus, cfg)?;
    Ok((matrix.attach_to(corpus)?, thresholds))
}

pub fn fit_stage(votes: &Corpus, cfg: &FitConfig) -> Result<ModelFile> {
    let matrix = SignalMatrix::from_corpus_votes(votes)?;
    let (params, report) = label_model::fit(&matrix, cfg)?;
    Ok(ModelFile::new(matrix.sources(), &params, Some(report)))
}

pub fn label_stage(votes: &Corpus, method: Method, model: Option<&ModelFile>) -> Result<Corpus> {
    let labels = match method {
        Method::Model => {
            let model = model.ok_or_else(|| {
                Error::Config("method 'model' requires a fitted model file".into())
            })?;
            let matrix = SignalMatrix::from_corpus_votes(votes)?;
            let params = model.params_for(matrix.sources())?;
            label_model::label_corpus(&matrix, &params)
        }
        Method::Average => average_corpus(votes)?.p_pos,
        Method::Majority => majority_corpus(&SignalMatrix::from_corpus_votes(votes)?).p_pos,
    };
    votes.with_labels(&labels)
}

pub fn filter_stage(labeled: &Corpus, cfg: &QuantileConfig) -> Result<(Corpus, SourceThresholds)> {
    let labels = labeled_scores(labeled)?;
    let out = filter_labels(&labels, cfg)?;
    Ok((labeled.select(&out.kept), out.thresholds))
}

/// Trains on the labeled corpus; `filter = None` trains on every sample.
pub fn train_stage(
    labeled: &Corpus,
    features: &FeatureTable,
    filter: Option<&QuantileConfig>,
    cfg: &TrainConfig,
) -> Result<ClassifierFile> {
    let (set, outcome) = build_training_set(labeled, features, filter)?;
    let (params, trace) = training::train(&set, cfg)?;
    Ok(ClassifierFile {
        weights: params.weights,
        bias: params.bias,
        train: *cfg,
        n_train: set.len(),
        n_filtered_out: labeled.len() - set.len(),
        filter_thresholds: outcome.map(|o| o.thresholds),
        initial_loss: trace[0],
        final_loss: *trace.last().expect("trace holds the initial loss"),
    })
}

/// Classifier output for every record of `corpus`.
pub fn classifier_scores(
    corpus: &Corpus,
    features: &FeatureTable,
    clf: &ClassifierFile,
) -> Result<Vec<f64>> {
    let params = clf.params();
    corpus
        .records()
        .iter()
        .map(|r| {
            let x = features
                .get(&r.id)
                .ok_or_else(|| Error::Validation(format!("no features for record '{}'", r.id)))?;
            training::predict(&params, x)
        })
        .collect()
}

/// Densities of the evaluated scores and of every source's raw scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityExport {
    pub scores: Histogram,
    pub sources: IndexMap<String, Histogram>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub bins: Option<usize>,
    pub density_bins: Option<usize>,
}

pub fn eval_stage(
    corpus: &Corpus,
    scores: &[f64],
    opts: &EvalOptions,
) -> Result<(EvalReport, Option<DensityExport>)> {
    let mut report = eval_report(corpus, scores)?;
    if let Some(bins) = opts.bins {
        let binned = binned_auc(corpus, scores, bins)?;
        if binned.iter().any(|b| b.n > 0) {
            report.binned_auc = Some(binned);
        }
    }
    let density = match opts.density_bins {
        None => None,
        Some(n) => {
            let mut sources = IndexMap::new();
            for s in corpus.sources() {
                let raw: Vec<f64> = corpus
                    .records()
                    .iter()
                    .filter_map(|r| r.scores.get(s).copied())
                    .collect();
                if !raw.is_empty() {
                    sources.insert(s.clone(), density_export(&raw, n)?);
                }
            }
            Some(DensityExport {
                scores: density_export(scores, n)?,
                sources,
            })
        }
    };
    Ok((report, density))
}

pub fn thresholds_bytes(th: &IndexMap<String, SourceThresholds>) -> Vec<u8> {
    to_json_bytes(th)
}

/// Configuration for [`run_pipeline`]. Either `synth` or `corpus` (plus
/// `features` for training) supplies the input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub out_dir: PathBuf,
    #[serde(default)]
    pub synth: Option<SynthConfig>,
    #[serde(default)]
    pub corpus: Option<PathBuf>,
    #[serde(default)]
    pub features: Option<PathBuf>,
    #[serde(default)]
    pub unify: QuantileConfig,
    #[serde(default)]
    pub filter: QuantileConfig,
    #[serde(default)]
    pub fit: FitConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default = "default_bins")]
    pub eval_bins: Option<usize>,
    #[serde(default = "default_density_bins")]
    pub density_bins: Option<usize>,
}

fn default_method() -> Method {
    Method::Model
}

fn default_bins() -> Option<usize> {
    Some(10)
}

fn default_density_bins() -> Option<usize> {
    Some(20)
}

impl PipelineConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path)
    }

    /// Threads one seed through every stochastic stage.
    pub fn set_seed(&mut self, seed: u64) {
        if let Some(s) = &mut self.synth {
            s.seed = seed;
        }
        self.train.seed = seed;
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.synth, &self.corpus) {
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give either 'synth' or 'corpus', not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config(
                    "one of 'synth' or 'corpus' is required".into(),
                ))
            }
            (None, Some(_)) if self.features.is_none() => {
                return Err(Error::Config("'features' is required with 'corpus'".into()))
            }
            _ => {}
        }
        for p in self.corpus.iter().chain(&self.features) {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "input path {} does not exist",
                    p.display()
                )));
            }
        }
        self.unify.validate()?;
        self.filter.validate()
    }

    pub fn artifact_path(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}

pub const CORPUS_FILE: &str = "corpus.jsonl";
pub const FEATURES_FILE: &str = "features.jsonl";
pub const VOTES_FILE: &str = "votes.jsonl";
pub const THRESHOLDS_FILE: &str = "thresholds.json";
pub const MODEL_FILE: &str = "model.json";
pub const LABELED_FILE: &str = "labeled.jsonl";
pub const FILTERED_FILE: &str = "filtered.jsonl";
pub const CLASSIFIER_FILE: &str = "classifier.json";
pub const REPORT_FILE: &str = "report.json";
pub const CLASSIFIER_REPORT_FILE: &str = "classifier_report.json";
pub const DENSITY_FILE: &str = "density.json";

/// Runs simulate/ingest, unify, fit, label, filter, train and eval. All
/// artifacts are computed before the first one is written; a failing stage
/// leaves earlier outputs untouched.
pub fn run_pipeline(cfg: &PipelineConfig, log: &Logger) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let staged = |stage: &'static str| move |e: Error| StageError::wrap(stage, e);
    let mut artifacts = Vec::new();

    let (corpus, features) = match (&cfg.synth, &cfg.corpus, &cfg.features) {
        (Some(synth), _, _) => {
            let (corpus, features) = simulate_stage(synth).map_err(staged("simulate"))?;
            log.info(
                "simulate",
                format!(
                    "{} samples, {} sources",
                    corpus.len(),
                    corpus.sources().len()
                ),
            );
            artifacts.push(Artifact::new(
                cfg.artifact_path(CORPUS_FILE),
                corpus.to_jsonl().into_bytes(),
            ));
            artifacts.push(Artifact::new(
                cfg.artifact_path(FEATURES_FILE),
                features.to_jsonl().into_bytes(),
            ));
            (corpus, features)
        }
        (None, Some(corpus), Some(features)) => {
            let c = load_corpus(corpus).map_err(staged("ingest"))?;
            let f = load_features(features).map_err(staged("ingest"))?;
            log.info(
                "ingest",
                format!("{} samples, {} sources", c.len(), c.sources().len()),
            );
            (c, f)
        }
        _ => unreachable!("validated"),
    };

    let (votes, thresholds) = unify_stage(&corpus, &cfg.unify).map_err(staged("unify"))?;
    log.info(
        "unify",
        format!("p_pos={} p_neg={}", cfg.unify.p_pos, cfg.unify.p_neg),
    );
    artifacts.push(Artifact::new(
        cfg.artifact_path(VOTES_FILE),
        votes.to_jsonl().into_bytes(),
    ));
    artifacts.push(Artifact::new(
        cfg.artifact_path(THRESHOLDS_FILE),
        thresholds_bytes(&thresholds),
    ));

    let model = if cfg.method == Method::Model {
        let model = fit_stage(&votes, &cfg.fit).map_err(staged("fit"))?;
        if let Some(r) = &model.fit_report {
            log.info(
                "fit",
                format!(
                    "{} iterations, log-likelihood {:.6}, converged={}",
                    r.iterations, r.final_log_likelihood, r.converged
                ),
            );
        }
        artifacts.push(Artifact::new(
            cfg.artifact_path(MODEL_FILE),
            to_json_bytes(&model),
        ));
        Some(model)
    } else {
        None
    };

    let labeled = label_stage(&votes, cfg.method, model.as_ref()).map_err(staged("label"))?;
    log.info("label", format!("method={}", cfg.method));
    artifacts.push(Artifact::new(
        cfg.artifact_path(LABELED_FILE),
        labeled.to_jsonl().into_bytes(),
    ));

    let (filtered, fth) = filter_stage(&labeled, &cfg.filter).map_err(staged("filter"))?;
    log.info(
        "filter",
        format!(
            "kept {} of {} (gamma_neg={}, gamma_pos={})",
            filtered.len(),
            labeled.len(),
            fth.gamma_neg,
            fth.gamma_pos
        ),
    );
    artifacts.push(Artifact::new(
        cfg.artifact_path(FILTERED_FILE),
        filtered.to_jsonl().into_bytes(),
    ));

    let clf =
        train_stage(&labeled, &features, Some(&cfg.filter), &cfg.train).map_err(staged("train"))?;
    log.info(
        "train",
        format!("loss {:.6} -> {:.6}", clf.initial_loss, clf.final_loss),
    );
    artifacts.push(Artifact::new(
        cfg.artifact_path(CLASSIFIER_FILE),
        to_json_bytes(&clf),
    ));

    let opts = EvalOptions {
        bins: cfg.eval_bins,
        density_bins: cfg.density_bins,
    };
    let scores = labeled_scores(&labeled).map_err(staged("eval"))?;
    let (report, density) = eval_stage(&labeled, &scores, &opts).map_err(staged("eval"))?;
    for w in report.warnings() {
        log.info("eval", format!("warning: {w}"));
    }
    log.info("eval", format!("label AUC {:.4}", report.mean_auc));
    artifacts.push(Artifact::new(
        cfg.artifact_path(REPORT_FILE),
        to_json_bytes(&report),
    ));
    if let Some(d) = density {
        artifacts.push(Artifact::new(
            cfg.artifact_path(DENSITY_FILE),
            to_json_bytes(&d),
        ));
    }

    let clf_scores = classifier_scores(&labeled, &features, &clf).map_err(staged("eval"))?;
    let no_extras = EvalOptions {
        bins: cfg.eval_bins,
        density_bins: None,
    };
    let (clf_report, _) = eval_stage(&labeled, &clf_scores, &no_extras).map_err(staged("eval"))?;
    log.info("eval", format!("classifier AUC {:.4}", clf_report.mean_auc));
    artifacts.push(Artifact::new(
        cfg.artifact_path(CLASSIFIER_REPORT_FILE),
        to_json_bytes(&clf_report),
    ));

    std::fs::create_dir_all(&cfg.out_dir).map_err(|e| Error::io(&cfg.out_dir, e))?;
    commit(&artifacts, "pipeline", log)?;
    Ok(artifacts.into_iter().map(|a| a.path).collect())
}

/// A stage failure: which stage, and why.
#[derive(Debug, thiserror::Error)]
#[error("stage '{stage}' failed: {source}")]
pub struct StageError {
    pub stage: &'static str,
    #[source]
    pub source: Error,
}

impl StageError {
    fn wrap(stage: &'static str, source: Error) -> Error {
        Error::Stage(Box::new(StageError { stage, source }))
    }
}
