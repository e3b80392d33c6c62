//! Quantile-threshold unification of continuous scores into discrete votes.
//!
//! Each source gets its own pair of thresholds taken from the empirical
//! distribution of its scores: the lowest `p_neg` mass votes 0, the highest
//! `p_pos` mass votes 1, everything strictly between abstains.

use std::fmt;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_store::Corpus;

/// A unified weak-signal vote.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Vote {
    Neg,
    Pos,
    Abstain,
}

impl Vote {
    pub fn to_i8(self) -> i8 {
        match self {
            Vote::Neg => 0,
            Vote::Pos => 1,
            Vote::Abstain => -1,
        }
    }

    pub fn from_i8(v: i8) -> Option<Vote> {
        match v {
            0 => Some(Vote::Neg),
            1 => Some(Vote::Pos),
            -1 => Some(Vote::Abstain),
            _ => None,
        }
    }

    /// The voted label, or `None` for an abstain.
    pub fn label(self) -> Option<u8> {
        match self {
            Vote::Neg => Some(0),
            Vote::Pos => Some(1),
            Vote::Abstain => None,
        }
    }
}

impl fmt::Display for Vote {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_i8())
    }
}

/// Probability masses mapped to the positive and negative votes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuantileConfig {
    pub p_pos: f64,
    pub p_neg: f64,
}

impl QuantileConfig {
    pub fn new(p_pos: f64, p_neg: f64) -> Result<Self> {
        let cfg = QuantileConfig { p_pos, p_neg };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, p) in [("p_pos", self.p_pos), ("p_neg", self.p_neg)] {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {p}")));
            }
        }
        Ok(())
    }
}

impl Default for QuantileConfig {
    fn default() -> Self {
        QuantileConfig {
            p_pos: 0.75,
            p_neg: 0.25,
        }
    }
}

/// Per-source score thresholds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SourceThresholds {
    pub gamma_pos: f64,
    pub gamma_neg: f64,
}

/// Lower empirical quantile: the smallest observed `v` with
/// `#{x <= v} / n >= q`. `q = 0` gives the minimum.
pub fn empirical_quantile(scores: &[f64], q: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(sorted[quantile_rank(sorted.len(), q) - 1])
}

/// Smallest count `k >= 1` with `k / n >= q`, evaluated in floating point so
/// that e.g. `q = 0.3, n = 10` yields 3 rather than 4.
fn quantile_rank(n: usize, q: f64) -> usize {
    let nf = n as f64;
    let mut k = ((q * nf).ceil() as usize).clamp(1, n);
    while k > 1 && (k - 1) as f64 / nf >= q {
        k -= 1;
    }
    while k < n && (k as f64) / nf < q {
        k += 1;
    }
    k
}

/// Thresholds for one source: `gamma_pos = F(1 - p_pos)`, `gamma_neg = F(p_neg)`.
pub fn compute_thresholds(scores: &[f64], cfg: &QuantileConfig) -> Result<SourceThresholds> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    Ok(SourceThresholds {
        gamma_pos: sorted[quantile_rank(n, 1.0 - cfg.p_pos) - 1],
        gamma_neg: sorted[quantile_rank(n, cfg.p_neg) - 1],
    })
}

/// Maps a score to a vote. The negative branch is tested first, so a score
/// equal to both thresholds votes 0. Missing scores abstain.
pub fn map_signal(score: Option<f64>, th: &SourceThresholds) -> Vote {
    match score {
        None => Vote::Abstain,
        Some(s) if s <= th.gamma_neg => Vote::Neg,
        Some(s) if s >= th.gamma_pos => Vote::Pos,
        Some(_) => Vote::Abstain,
    }
}

/// N samples by K sources of unified votes, stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    votes: Vec<Vote>,
    sources: Vec<String>,
    sample_ids: Vec<String>,
}

impl SignalMatrix {
    pub fn new(votes: Vec<Vote>, sources: Vec<String>, sample_ids: Vec<String>) -> Result<Self> {
        if votes.len() != sources.len() * sample_ids.len() {
            return Err(Error::LengthMismatch {
                what: "votes",
                expected: sources.len() * sample_ids.len(),
                actual: votes.len(),
            });
        }
        Ok(SignalMatrix {
            votes,
            sources,
            sample_ids,
        })
    }

    /// Builds a matrix from nested rows, naming sources `s0..` and samples `n0..`.
    pub fn from_rows(rows: &[Vec<Vote>]) -> Result<Self> {
        let k = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != k) {
            return Err(Error::LengthMismatch {
                what: "votes per row",
                expected: k,
                actual: bad.len(),
            });
        }
        SignalMatrix::new(
            rows.concat(),
            (0..k).map(|i| format!("s{i}")).collect(),
            (0..rows.len()).map(|i| format!("n{i}")).collect(),
        )
    }

    /// Reads the `votes` field of every record. Every record must carry a vote
    /// for every source of the corpus.
    pub fn from_corpus_votes(corpus: &Corpus) -> Result<Self> {
        let sources = corpus.sources().to_vec();
        let mut votes = Vec::with_capacity(corpus.len() * sources.len());
        for r in corpus.records() {
            let Some(rv) = &r.votes else {
                return Err(Error::Validation(format!(
                    "record '{}' has no votes; run unification first",
                    r.id
                )));
            };
            if let Some(extra) = rv.keys().find(|k| !sources.contains(k)) {
                return Err(Error::Validation(format!(
                    "record '{}' votes for unknown source '{extra}'",
                    r.id
                )));
            }
            for s in &sources {
                let v = rv.get(s).copied().ok_or_else(|| {
                    Error::Validation(format!("record '{}' has no vote for source '{s}'", r.id))
                })?;
                votes.push(Vote::from_i8(v).expect("validated on load"));
            }
        }
        SignalMatrix::new(
            votes,
            sources,
            corpus.records().iter().map(|r| r.id.clone()).collect(),
        )
    }

    pub fn n_samples(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn n_sources(&self) -> usize {
        self.sources.len()
    }

    pub fn sources(&self) -> &[String] {
        &self.sources
    }

    pub fn sample_ids(&self) -> &[String] {
        &self.sample_ids
    }

    pub fn row(&self, n: usize) -> &[Vote] {
        let k = self.sources.len();
        &self.votes[n * k..(n + 1) * k]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Vote]> {
        (0..self.n_samples()).map(move |n| self.row(n))
    }

    pub fn get(&self, n: usize, i: usize) -> Vote {
        self.votes[n * self.sources.len() + i]
    }

    /// Number of non-abstain votes cast by source `i`.
    pub fn coverage(&self, i: usize) -> usize {
        self.rows().filter(|r| r[i] != Vote::Abstain).count()
    }

    /// Returns a copy of `corpus` with this matrix written into each record's `votes`.
    pub fn attach_to(&self, corpus: &Corpus) -> Result<Corpus> {
        if corpus.len() != self.n_samples() {
            return Err(Error::LengthMismatch {
                what: "records",
                expected: self.n_samples(),
                actual: corpus.len(),
            });
        }
        let records = corpus
            .records()
            .iter()
            .zip(self.rows())
            .map(|(r, row)| {
                let votes = self
                    .sources
                    .iter()
                    .zip(row)
                    .map(|(s, v)| (s.clone(), v.to_i8()))
                    .collect::<IndexMap<_, _>>();
                let mut r = r.clone();
                r.votes = Some(votes);
                r
            })
            .collect();
        Corpus::with_sources(records, corpus.sources().to_vec())
    }
}

/// Computes per-source thresholds over present scores and maps every sample.
pub fn unify_corpus(
    corpus: &Corpus,
    cfg: &QuantileConfig,
) -> Result<(SignalMatrix, IndexMap<String, SourceThresholds>)> {
    cfg.validate()?;
    let mut thresholds = IndexMap::with_capacity(corpus.sources().len());
    for source in corpus.sources() {
        let present: Vec<f64> = corpus
            .records()
            .iter()
            .filter_map(|r| r.scores.get(source).copied())
            .collect();
        if present.is_empty() {
            return Err(Error::NoScores(source.clone()));
        }
        thresholds.insert(source.clone(), compute_thresholds(&present, cfg)?);
    }
    let mut votes = Vec::with_capacity(corpus.len() * thresholds.len());
    for r in corpus.records() {
        for (source, th) in &thresholds {
            votes.push(map_signal(r.scores.get(source).copied(), th));
        }
    }
    let matrix = SignalMatrix::new(
        votes,
        corpus.sources().to_vec(),
        corpus.records().iter().map(|r| r.id.clone()).collect(),
    )?;
    Ok((matrix, thresholds))
}
