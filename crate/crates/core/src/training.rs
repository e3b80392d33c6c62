//! Confidence filtering of soft labels and soft-label training of a
//! linear-sigmoid classifier.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_store::{Corpus, FeatureTable};
use crate::unification::{compute_thresholds, map_signal, QuantileConfig, SourceThresholds, Vote};

/// Predictions are kept inside `[PROB_EPS, 1 - PROB_EPS]` before taking logs.
pub const PROB_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingItem {
    pub id: String,
    pub features: Vec<f64>,
    pub p_pos: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    dim: usize,
    items: Vec<TrainingItem>,
}

impl TrainingSet {
    pub fn new(items: Vec<TrainingItem>) -> Result<Self> {
        let dim = items.first().map_or(0, |it| it.features.len());
        for it in &items {
            if it.features.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    actual: it.features.len(),
                });
            }
            if !(0.0..=1.0).contains(&it.p_pos) {
                return Err(Error::Validation(format!(
                    "training label {} for '{}' is outside [0,1]",
                    it.p_pos, it.id
                )));
            }
        }
        Ok(TrainingSet { dim, items })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn items(&self) -> &[TrainingItem] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }
}

/// Outcome of confidence filtering.
#[derive(Debug, Clone, PartialEq)]
pub struct FilterResult {
    /// Indices of kept labels, increasing.
    pub kept: Vec<usize>,
    pub thresholds: SourceThresholds,
}

/// Drops every label the mapping function sends to abstain, with thresholds
/// recomputed on the distribution of the labels themselves.
pub fn filter_labels(labels: &[f64], cfg: &QuantileConfig) -> Result<FilterResult> {
    if labels.is_empty() {
        return Err(Error::Empty("label list"));
    }
    cfg.validate()?;
    let thresholds = compute_thresholds(labels, cfg)?;
    Ok(filter_with(labels, thresholds))
}

/// Filtering against fixed thresholds.
pub fn filter_with(labels: &[f64], thresholds: SourceThresholds) -> FilterResult {
    let kept = labels
        .iter()
        .enumerate()
        .filter(|(_, &p)| map_signal(Some(p), &thresholds) != Vote::Abstain)
        .map(|(i, _)| i)
        .collect();
    FilterResult { kept, thresholds }
}

/// Joins a labeled corpus to its features, optionally filtering by confidence.
/// Returns the training set and the filter outcome (if any).
pub fn build_training_set(
    labeled: &Corpus,
    features: &FeatureTable,
    filter: Option<&QuantileConfig>,
) -> Result<(TrainingSet, Option<FilterResult>)> {
    let labels = labeled
        .records()
        .iter()
        .map(|r| {
            r.p_pos.ok_or_else(|| {
                Error::Validation(format!(
                    "record '{}' has no p_pos; label the corpus first",
                    r.id
                ))
            })
        })
        .collect::<Result<Vec<f64>>>()?;
    let outcome = filter.map(|cfg| filter_labels(&labels, cfg)).transpose()?;
    let indices: Vec<usize> = match &outcome {
        Some(f) => f.kept.clone(),
        None => (0..labels.len()).collect(),
    };
    let items = indices
        .into_iter()
        .map(|i| {
            let r = &labeled.records()[i];
            let x = features
                .get(&r.id)
                .ok_or_else(|| Error::Validation(format!("no features for record '{}'", r.id)))?;
            Ok(TrainingItem {
                id: r.id.clone(),
                features: x.to_vec(),
                p_pos: labels[i],
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((TrainingSet::new(items)?, outcome))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierParams {
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl ClassifierParams {
    pub fn zeros(dim: usize) -> Self {
        ClassifierParams {
            weights: vec![0.0; dim],
            bias: 0.0,
        }
    }

    fn logit(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `sigmoid(w . x + b)`, clamped away from 0 and 1.
pub fn predict(params: &ClassifierParams, x: &[f64]) -> Result<f64> {
    if x.len() != params.weights.len() {
        return Err(Error::Dimension {
            expected: params.weights.len(),
            actual: x.len(),
        });
    }
    Ok(sigmoid(params.logit(x)).clamp(PROB_EPS, 1.0 - PROB_EPS))
}

fn check_dim(params: &ClassifierParams, set: &TrainingSet) -> Result<()> {
    if !set.is_empty() && set.dim() != params.weights.len() {
        return Err(Error::Dimension {
            expected: params.weights.len(),
            actual: set.dim(),
        });
    }
    Ok(())
}

/// Summed soft-label cross-entropy (natural log).
pub fn soft_ce_loss(params: &ClassifierParams, set: &TrainingSet) -> Result<f64> {
    check_dim(params, set)?;
    let mut loss = 0.0;
    for it in set.items() {
        let f = predict(params, &it.features)?;
        loss -= it.p_pos * f.ln() + (1.0 - it.p_pos) * (1.0 - f).ln();
    }
    Ok(loss)
}

/// Derivative of one sample's loss with respect to its pre-sigmoid logit.
pub fn logit_gradient(prediction: f64, p_pos: f64) -> f64 {
    prediction - p_pos
}

/// Gradient of the summed loss: `(d/dw, d/db)`.
pub fn loss_gradient(params: &ClassifierParams, set: &TrainingSet) -> Result<(Vec<f64>, f64)> {
    check_dim(params, set)?;
    let mut gw = vec![0.0; params.weights.len()];
    let mut gb = 0.0;
    for it in set.items() {
        let g = logit_gradient(predict(params, &it.features)?, it.p_pos);
        for (acc, x) in gw.iter_mut().zip(&it.features) {
            *acc += g * x;
        }
        gb += g;
    }
    Ok((gw, gb))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Step size applied to the gradient of the summed loss.
    pub lr: f64,
    pub epochs: usize,
    /// Recorded for provenance; full-batch descent from zero draws no randomness.
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-3,
            epochs: 500,
            seed: 13,
        }
    }
}

/// Full-batch gradient descent from zero. Returns the parameters and the loss
/// before the first step followed by the loss after every epoch.
pub fn train(set: &TrainingSet, cfg: &TrainConfig) -> Result<(ClassifierParams, Vec<f64>)> {
    if set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!(
            "learning rate must be positive, got {}",
            cfg.lr
        )));
    }
    let mut params = ClassifierParams::zeros(set.dim());
    let mut trace = Vec::with_capacity(cfg.epochs + 1);
    trace.push(soft_ce_loss(&params, set)?);
    for epoch in 1..=cfg.epochs {
        let (gw, gb) = loss_gradient(&params, set)?;
        for (w, g) in params.weights.iter_mut().zip(&gw) {
            *w -= cfg.lr * g;
        }
        params.bias -= cfg.lr * gb;
        let loss = soft_ce_loss(&params, set)?;
        if !loss.is_finite() || params.weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite { epoch, value: loss });
        }
        trace.push(loss);
    }
    Ok((params, trace))
}

/// On-disk form of a trained classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierFile {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub train: TrainConfig,
    pub n_train: usize,
    pub n_filtered_out: usize,
    #[serde(default)]
    pub filter_thresholds: Option<SourceThresholds>,
    pub initial_loss: f64,
    pub final_loss: f64,
}

impl ClassifierFile {
    pub fn params(&self) -> ClassifierParams {
        ClassifierParams {
            weights: self.weights.clone(),
            bias: self.bias,
        }
    }
}
