//! Weak-supervision label aggregation.
//!
//! Continuous scores from several imperfect scorers are turned into
//! probabilistic training labels in three steps:
//!
//! 1. [`unification`] maps each source's scores to votes in `{0, 1, abstain}`
//!    using per-source quantile thresholds;
//! 2. [`label_model`] fits a generative model of the votes (per-source
//!    accuracy and propensity) by EM and returns posterior soft labels;
//! 3. [`training`] drops low-confidence labels and fits a linear-sigmoid
//!    classifier with soft-label cross-entropy.
//!
//! [`evaluation`] scores any of these against gold labels with ROC AUC,
//! [`baselines`] provides average-signal and majority-vote aggregators for
//! comparison, and [`synth`] generates corpora with known ground truth.

pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod label_model;
pub mod pipeline;
pub mod signal_store;
pub mod synth;
pub mod training;
pub mod unification;

pub use error::{Error, Result};
pub use signal_store::{Corpus, FeatureTable, SampleRecord};
pub use unification::{QuantileConfig, SignalMatrix, Vote};
