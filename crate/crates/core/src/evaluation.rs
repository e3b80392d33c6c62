//! ROC AUC, per-dataset reports, abstractiveness binning and score densities.

use std::collections::HashSet;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_store::Corpus;

/// Group name used for records without a `dataset` tag.
pub const DEFAULT_DATASET: &str = "default";

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counting one half. Exact: pair counts are accumulated as
/// integers and divided once.
pub fn roc_auc(scores: &[f64], gold: &[u8]) -> Result<f64> {
    if scores.len() != gold.len() {
        return Err(Error::LengthMismatch {
            what: "gold labels",
            expected: scores.len(),
            actual: gold.len(),
        });
    }
    if let Some(bad) = scores.iter().find(|s| !s.is_finite()) {
        return Err(Error::Validation(format!("non-finite score {bad}")));
    }
    if let Some(bad) = gold.iter().find(|&&g| g > 1) {
        return Err(Error::Validation(format!("gold label {bad} is not 0 or 1")));
    }
    let n_pos = gold.iter().filter(|&&g| g == 1).count() as u64;
    let n_neg = gold.len() as u64 - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::AucUndefined(format!(
            "{n_pos} positives and {n_neg} negatives"
        )));
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));

    // twice the Mann-Whitney U statistic
    let mut twice_u: u64 = 0;
    let mut neg_below: u64 = 0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        let (mut pos, mut neg) = (0u64, 0u64);
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            if gold[order[j]] == 1 {
                pos += 1;
            } else {
                neg += 1;
            }
            j += 1;
        }
        twice_u += 2 * pos * neg_below + pos * neg;
        neg_below += neg;
        i = j;
    }
    Ok(twice_u as f64 / (2 * n_pos * n_neg) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExcludedGroup {
    pub dataset: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinAuc {
    pub n: usize,
    pub abstractiveness_min: Option<f64>,
    pub abstractiveness_max: Option<f64>,
    /// `None` when the bin lacks one of the classes.
    pub auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub auc_by_dataset: IndexMap<String, f64>,
    pub mean_auc: f64,
    /// Population variance of the per-dataset AUCs.
    pub variance: f64,
    /// `variance` expressed in squared percentage points.
    pub variance_x1e4: f64,
    pub n_by_dataset: IndexMap<String, usize>,
    pub excluded: Vec<ExcludedGroup>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub binned_auc: Option<Vec<BinAuc>>,
}

impl EvalReport {
    pub fn warnings(&self) -> impl Iterator<Item = String> + '_ {
        self.excluded
            .iter()
            .map(|g| format!("dataset '{}' excluded: {}", g.dataset, g.reason))
    }
}

/// Per-dataset AUC of `scores` (aligned with `corpus`) against gold labels.
/// Records without gold are ignored; groups lacking a class are excluded.
pub fn eval_report(corpus: &Corpus, scores: &[f64]) -> Result<EvalReport> {
    if scores.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            what: "scores",
            expected: corpus.len(),
            actual: scores.len(),
        });
    }
    let mut groups: IndexMap<String, (Vec<f64>, Vec<u8>)> = IndexMap::new();
    for (r, &s) in corpus.records().iter().zip(scores) {
        let Some(g) = r.gold else { continue };
        let name = r.dataset.as_deref().unwrap_or(DEFAULT_DATASET);
        let entry = groups.entry(name.to_string()).or_default();
        entry.0.push(s);
        entry.1.push(g);
    }

    let mut auc_by_dataset = IndexMap::new();
    let mut n_by_dataset = IndexMap::new();
    let mut excluded = Vec::new();
    for (name, (s, g)) in &groups {
        match roc_auc(s, g) {
            Ok(auc) => {
                auc_by_dataset.insert(name.clone(), auc);
                n_by_dataset.insert(name.clone(), s.len());
            }
            Err(Error::AucUndefined(reason)) => excluded.push(ExcludedGroup {
                dataset: name.clone(),
                reason,
            }),
            Err(e) => return Err(e),
        }
    }
    if auc_by_dataset.is_empty() {
        return Err(Error::AucUndefined(
            "no dataset group has both gold classes".to_string(),
        ));
    }
    let k = auc_by_dataset.len() as f64;
    let mean_auc = auc_by_dataset.values().sum::<f64>() / k;
    let variance = auc_by_dataset
        .values()
        .map(|a| (a - mean_auc).powi(2))
        .sum::<f64>()
        / k;
    Ok(EvalReport {
        auc_by_dataset,
        mean_auc,
        variance,
        variance_x1e4: variance * 1e4,
        n_by_dataset,
        excluded,
        binned_auc: None,
    })
}

/// Report over the `p_pos` field of a labeled corpus.
pub fn eval_labeled(corpus: &Corpus) -> Result<EvalReport> {
    eval_report(corpus, &labeled_scores(corpus)?)
}

/// The `p_pos` of every record; an unlabeled record is an error.
pub fn labeled_scores(corpus: &Corpus) -> Result<Vec<f64>> {
    corpus
        .records()
        .iter()
        .map(|r| {
            r.p_pos
                .ok_or_else(|| Error::Validation(format!("record '{}' has no p_pos", r.id)))
        })
        .collect()
}

/// Lowercased whitespace tokens with surrounding ASCII punctuation removed.
pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split_whitespace()
        .map(|t| {
            t.trim_matches(|c: char| c.is_ascii_punctuation())
                .to_lowercase()
        })
        .filter(|t| !t.is_empty())
}

/// Fraction of hypothesis token types that never occur in the premise.
pub fn abstractiveness(premise: &str, hypothesis: &str) -> Result<f64> {
    let hyp: HashSet<String> = tokenize(hypothesis).collect();
    if hyp.is_empty() {
        return Err(Error::Empty("hypothesis"));
    }
    let prem: HashSet<String> = tokenize(premise).collect();
    let novel = hyp.iter().filter(|t| !prem.contains(*t)).count();
    Ok(novel as f64 / hyp.len() as f64)
}

/// Sizes of `n_bins` equal-count bins over `n` items, remainder to the earliest bins.
pub fn bin_sizes(n: usize, n_bins: usize) -> Vec<usize> {
    (0..n_bins)
        .map(|b| n / n_bins + usize::from(b < n % n_bins))
        .collect()
}

/// AUC within equal-count bins of increasing abstractiveness. Only records
/// with gold, premise and a non-empty hypothesis take part.
pub fn binned_auc(corpus: &Corpus, scores: &[f64], n_bins: usize) -> Result<Vec<BinAuc>> {
    if n_bins == 0 {
        return Err(Error::Config("number of bins must be at least 1".into()));
    }
    if scores.len() != corpus.len() {
        return Err(Error::LengthMismatch {
            what: "scores",
            expected: corpus.len(),
            actual: scores.len(),
        });
    }
    let mut rows: Vec<(f64, f64, u8)> = Vec::new();
    for (r, &s) in corpus.records().iter().zip(scores) {
        let (Some(g), Some(p), Some(h)) = (r.gold, &r.premise, &r.hypothesis) else {
            continue;
        };
        match abstractiveness(p, h) {
            Ok(a) => rows.push((a, s, g)),
            Err(Error::Empty(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut out = Vec::with_capacity(n_bins);
    let mut start = 0;
    for size in bin_sizes(rows.len(), n_bins) {
        let bin = &rows[start..start + size];
        start += size;
        let s: Vec<f64> = bin.iter().map(|r| r.1).collect();
        let g: Vec<u8> = bin.iter().map(|r| r.2).collect();
        let auc = match roc_auc(&s, &g) {
            Ok(a) => Some(a),
            Err(Error::AucUndefined(_)) => None,
            Err(e) => return Err(e),
        };
        out.push(BinAuc {
            n: size,
            abstractiveness_min: bin.first().map(|r| r.0),
            abstractiveness_max: bin.last().map(|r| r.0),
            auc,
        });
    }
    Ok(out)
}

/// Equal-width histogram over [0,1], normalized to unit area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub densities: Vec<f64>,
}

/// A value on an interior edge goes to the upper bin; 1.0 goes to the last bin.
pub fn density_export(scores: &[f64], n_bins: usize) -> Result<Histogram> {
    if scores.is_empty() {
        return Err(Error::Empty("score list"));
    }
    if n_bins == 0 {
        return Err(Error::Config("number of bins must be at least 1".into()));
    }
    if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Validation(format!("score {bad} is outside [0,1]")));
    }
    let edges: Vec<f64> = (0..=n_bins).map(|k| k as f64 / n_bins as f64).collect();
    let mut counts = vec![0usize; n_bins];
    for &s in scores {
        let mut b = ((s * n_bins as f64).floor() as usize).min(n_bins - 1);
        while b > 0 && s < edges[b] {
            b -= 1;
        }
        while b + 1 < n_bins && s >= edges[b + 1] {
            b += 1;
        }
        counts[b] += 1;
    }
    let width = 1.0 / n_bins as f64;
    let total = scores.len() as f64;
    Ok(Histogram {
        edges,
        densities: counts.iter().map(|&c| c as f64 / (total * width)).collect(),
    })
}
