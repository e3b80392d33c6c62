//! Synthetic corpora with known ground truth.
//!
//! Randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng::seed_from_u64`).
//! Uniform draws take the top 53 bits of `next_u64`; normal draws use the
//! cosine branch of Box-Muller on two consecutive uniforms. Per sample the
//! stream is consumed in a fixed order:
//!
//! 1. one uniform for the latent label (`y = 1` iff `u < prior_pos`);
//! 2. for each source in order: one uniform for abstention (votes iff
//!    `u < beta_i`), one for correctness (`u < alpha_i`), one for the score
//!    offset; all three are always drawn;
//! 3. `feature_dim` normals (two uniforms each).

use indexmap::IndexMap;
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_store::{Corpus, FeatureTable, SampleRecord};
use crate::unification::{SignalMatrix, Vote};

/// Largest offset added to (or subtracted from) a vote's base score.
pub const SCORE_SPREAD: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub true_alpha: Vec<f64>,
    pub true_beta: Vec<f64>,
    #[serde(default = "half")]
    pub prior_pos: f64,
    #[serde(default)]
    pub feature_dim: usize,
    #[serde(default = "one")]
    pub feature_noise: f64,
    #[serde(default)]
    pub seed: u64,
}

fn half() -> f64 {
    0.5
}

fn one() -> f64 {
    1.0
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::Config("n_samples must be at least 1".into()));
        }
        if self.true_alpha.is_empty() || self.true_alpha.len() != self.true_beta.len() {
            return Err(Error::Config(format!(
                "need one alpha and one beta per source, got {} and {}",
                self.true_alpha.len(),
                self.true_beta.len()
            )));
        }
        let probs = self
            .true_alpha
            .iter()
            .chain(&self.true_beta)
            .chain(std::iter::once(&self.prior_pos));
        for &p in probs {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!(
                    "probability {p} is not inside (0,1)"
                )));
            }
        }
        if !(self.feature_noise >= 0.0 && self.feature_noise.is_finite()) {
            return Err(Error::Config(format!(
                "feature_noise must be finite and >= 0, got {}",
                self.feature_noise
            )));
        }
        Ok(())
    }

    pub fn source_names(&self) -> Vec<String> {
        (0..self.true_alpha.len())
            .map(|i| format!("src{i}"))
            .collect()
    }
}

/// Everything drawn by [`generate`].
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    /// Raw scores and gold labels.
    pub corpus: Corpus,
    pub features: FeatureTable,
    /// The votes the scores were built from.
    pub votes: SignalMatrix,
}

impl SyntheticData {
    pub fn gold(&self) -> Vec<u8> {
        self.corpus
            .records()
            .iter()
            .map(|r| r.gold.expect("synthetic records carry gold"))
            .collect()
    }
}

struct Stream(ChaCha8Rng);

impl Stream {
    fn uniform(&mut self) -> f64 {
        (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    fn normal(&mut self) -> f64 {
        let u1 = self.uniform();
        let u2 = self.uniform();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Raw score emitted for a vote; `offset` is in `[0, SCORE_SPREAD)`.
pub fn score_for_vote(vote: Vote, offset: f64) -> f64 {
    match vote {
        Vote::Pos => 0.75 + offset,
        Vote::Neg => 0.25 - offset,
        Vote::Abstain => 0.5,
    }
}

pub fn generate(cfg: &SynthConfig) -> Result<SyntheticData> {
    cfg.validate()?;
    let mut rng = Stream(ChaCha8Rng::seed_from_u64(cfg.seed));
    let sources = cfg.source_names();
    let k = sources.len();

    let mut records = Vec::with_capacity(cfg.n_samples);
    let mut votes = Vec::with_capacity(cfg.n_samples * k);
    let mut features = IndexMap::with_capacity(cfg.n_samples);
    for n in 0..cfg.n_samples {
        let id = format!("syn-{n:06}");
        let y = u8::from(rng.uniform() < cfg.prior_pos);
        let mut record = SampleRecord::new(id.clone()).with_gold(y);
        for ((source, &alpha), &beta) in sources.iter().zip(&cfg.true_alpha).zip(&cfg.true_beta) {
            let speaks = rng.uniform() < beta;
            let correct = rng.uniform() < alpha;
            let offset = SCORE_SPREAD * rng.uniform();
            let vote = match (speaks, correct == (y == 1)) {
                (false, _) => Vote::Abstain,
                (true, true) => Vote::Pos,
                (true, false) => Vote::Neg,
            };
            votes.push(vote);
            record
                .scores
                .insert(source.clone(), score_for_vote(vote, offset));
        }
        let mean = f64::from(y) - 0.5;
        let x: Vec<f64> = (0..cfg.feature_dim)
            .map(|_| mean + cfg.feature_noise * rng.normal())
            .collect();
        features.insert(id, x);
        records.push(record);
    }
    let ids = records.iter().map(|r| r.id.clone()).collect();
    Ok(SyntheticData {
        corpus: Corpus::new(records)?,
        features: FeatureTable::new(features)?,
        votes: SignalMatrix::new(votes, sources, ids)?,
    })
}
