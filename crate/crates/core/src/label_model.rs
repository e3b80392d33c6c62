//! Generative label model over unified votes.
//!
//! Each source independently abstains with probability `1 - beta_i` and,
//! when it votes, reports the latent label with probability `alpha_i`. The
//! latent label has prior `prior_pos`. Parameters are fitted by EM on the
//! marginal likelihood; both M-steps are closed form.

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::unification::{SignalMatrix, Vote};

/// Probabilities are kept inside `[PARAM_EPS, 1 - PARAM_EPS]`.
pub const PARAM_EPS: f64 = 1e-4;

/// Starting accuracy for every source.
pub const INIT_ALPHA: f64 = 0.7;

fn clamp_prob(p: f64) -> f64 {
    p.clamp(PARAM_EPS, 1.0 - PARAM_EPS)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelModelParams {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub prior_pos: f64,
}

impl LabelModelParams {
    /// Builds clamped parameters. `alpha` and `beta` must have equal length.
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, prior_pos: f64) -> Result<Self> {
        if alpha.len() != beta.len() {
            return Err(Error::LengthMismatch {
                what: "beta entries",
                expected: alpha.len(),
                actual: beta.len(),
            });
        }
        let all = alpha.iter().chain(&beta).chain(std::iter::once(&prior_pos));
        if let Some(bad) = all.into_iter().find(|p| !(0.0..=1.0).contains(*p)) {
            return Err(Error::Validation(format!(
                "label model probability {bad} is outside [0,1]"
            )));
        }
        Ok(LabelModelParams {
            alpha: alpha.into_iter().map(clamp_prob).collect(),
            beta: beta.into_iter().map(clamp_prob).collect(),
            prior_pos: clamp_prob(prior_pos),
        })
    }

    pub fn n_sources(&self) -> usize {
        self.alpha.len()
    }

    fn log_prior(&self, y: u8) -> f64 {
        if y == 1 {
            self.prior_pos.ln()
        } else {
            (1.0 - self.prior_pos).ln()
        }
    }

    /// `log p(votes, y)`.
    pub fn log_joint(&self, votes: &[Vote], y: u8) -> f64 {
        assert_eq!(votes.len(), self.n_sources(), "vote vector length");
        let mut acc = self.log_prior(y);
        for ((&v, &a), &b) in votes.iter().zip(&self.alpha).zip(&self.beta) {
            acc += signal_likelihood(v, y, a, b).ln();
        }
        acc
    }

    /// `(log p(votes, 0), log p(votes, 1))`.
    fn log_joints(&self, votes: &[Vote]) -> (f64, f64) {
        (self.log_joint(votes, 0), self.log_joint(votes, 1))
    }
}

/// Likelihood of one vote given the latent label.
pub fn signal_likelihood(vote: Vote, y: u8, alpha: f64, beta: f64) -> f64 {
    match vote.label() {
        None => 1.0 - beta,
        Some(v) if v == y => beta * alpha,
        Some(_) => beta * (1.0 - alpha),
    }
}

/// `p(votes, y)`: one prior factor times the product of per-source likelihoods.
pub fn joint_probability(votes: &[Vote], y: u8, params: &LabelModelParams) -> f64 {
    params.log_joint(votes, y).exp()
}

/// Posterior `p(y = 1 | votes)`.
pub fn posterior(votes: &[Vote], params: &LabelModelParams) -> f64 {
    let (l0, l1) = params.log_joints(votes);
    1.0 / (1.0 + (l0 - l1).exp())
}

fn log_sum_exp(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// Marginal log-likelihood `sum_n log sum_y p(votes_n, y)`.
///
/// Summed with Neumaier compensation: near convergence EM gains are far below
/// the rounding error of a naive sum over many rows.
pub fn log_likelihood(matrix: &SignalMatrix, params: &LabelModelParams) -> f64 {
    let (mut sum, mut carry) = (0.0f64, 0.0f64);
    for row in matrix.rows() {
        let (l0, l1) = params.log_joints(row);
        let x = log_sum_exp(l0, l1);
        let t = sum + x;
        carry += if sum.abs() >= x.abs() {
            (sum - t) + x
        } else {
            (x - t) + sum
        };
        sum = t;
    }
    sum + carry
}

/// Posterior for every row, in input order.
pub fn label_corpus(matrix: &SignalMatrix, params: &LabelModelParams) -> Vec<f64> {
    matrix.rows().map(|row| posterior(row, params)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub prior_pos: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            prior_pos: 0.5,
            tol: 1e-8,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub iterations: usize,
    pub final_log_likelihood: f64,
    pub converged: bool,
    /// Log-likelihood at initialization followed by one entry per EM update.
    pub log_likelihood_trace: Vec<f64>,
}

/// Fits accuracies and propensities by EM with a fixed class prior.
pub fn fit(matrix: &SignalMatrix, cfg: &FitConfig) -> Result<(LabelModelParams, FitReport)> {
    let n = matrix.n_samples();
    let k = matrix.n_sources();
    if n == 0 {
        return Err(Error::Empty("signal matrix (no samples)"));
    }
    if k == 0 {
        return Err(Error::Empty("signal matrix (no sources)"));
    }
    if !(cfg.prior_pos > 0.0 && cfg.prior_pos < 1.0) {
        return Err(Error::Config(format!(
            "prior must lie in (0,1), got {}",
            cfg.prior_pos
        )));
    }
    if cfg.tol.is_nan() || cfg.tol < 0.0 {
        return Err(Error::Config(format!(
            "tolerance must be >= 0, got {}",
            cfg.tol
        )));
    }

    let coverage: Vec<usize> = (0..k).map(|i| matrix.coverage(i)).collect();
    // propensity has a label-free closed form; it is exact from the start
    let beta: Vec<f64> = coverage.iter().map(|&c| c as f64 / n as f64).collect();
    let mut params = LabelModelParams::new(vec![INIT_ALPHA; k], beta, cfg.prior_pos)?;

    let mut ll = log_likelihood(matrix, &params);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;
    let mut q = vec![0.0; n];
    let mut agree = vec![0.0; k];

    while iterations < cfg.max_iter {
        // E-step
        for (qn, row) in q.iter_mut().zip(matrix.rows()) {
            *qn = posterior(row, &params);
        }
        // M-step
        agree.iter_mut().for_each(|a| *a = 0.0);
        for (&qn, row) in q.iter().zip(matrix.rows()) {
            for (a, v) in agree.iter_mut().zip(row) {
                match v {
                    Vote::Pos => *a += qn,
                    Vote::Neg => *a += 1.0 - qn,
                    Vote::Abstain => {}
                }
            }
        }
        for i in 0..k {
            if coverage[i] > 0 {
                params.alpha[i] = clamp_prob(agree[i] / coverage[i] as f64);
            }
        }
        iterations += 1;

        let next = log_likelihood(matrix, &params);
        trace.push(next);
        let gain = next - ll;
        ll = next;
        if gain < cfg.tol {
            converged = true;
            break;
        }
    }

    Ok((
        params,
        FitReport {
            iterations,
            final_log_likelihood: ll,
            converged,
            log_likelihood_trace: trace,
        },
    ))
}

/// On-disk form of a fitted model, keyed by source name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub alpha: IndexMap<String, f64>,
    pub beta: IndexMap<String, f64>,
    pub prior_pos: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fit_report: Option<FitReport>,
}

impl ModelFile {
    pub fn new(sources: &[String], params: &LabelModelParams, report: Option<FitReport>) -> Self {
        ModelFile {
            alpha: sources
                .iter()
                .cloned()
                .zip(params.alpha.iter().copied())
                .collect(),
            beta: sources
                .iter()
                .cloned()
                .zip(params.beta.iter().copied())
                .collect(),
            prior_pos: params.prior_pos,
            fit_report: report,
        }
    }

    /// Parameters aligned to `sources`; every source must be present in the file.
    pub fn params_for(&self, sources: &[String]) -> Result<LabelModelParams> {
        let lookup = |map: &IndexMap<String, f64>, which: &str| -> Result<Vec<f64>> {
            sources
                .iter()
                .map(|s| {
                    map.get(s).copied().ok_or_else(|| {
                        Error::Validation(format!("model has no {which} for source '{s}'"))
                    })
                })
                .collect()
        };
        LabelModelParams::new(
            lookup(&self.alpha, "alpha")?,
            lookup(&self.beta, "beta")?,
            self.prior_pos,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use Vote::{Abstain as A, Neg as N, Pos as P};

    /// Direct product form, no logs.
    fn joint_oracle(votes: &[Vote], y: u8, alpha: &[f64], beta: &[f64], prior: f64) -> f64 {
        let mut p = if y == 1 { prior } else { 1.0 - prior };
        for i in 0..votes.len() {
            p *= match votes[i] {
                A => 1.0 - beta[i],
                v if v.label() == Some(y) => beta[i] * alpha[i],
                _ => beta[i] * (1.0 - alpha[i]),
            };
        }
        p
    }

    fn params(alpha: &[f64], beta: &[f64], prior: f64) -> LabelModelParams {
        LabelModelParams::new(alpha.to_vec(), beta.to_vec(), prior).unwrap()
    }

    #[test]
    fn likelihood_branches() {
        assert!((signal_likelihood(P, 1, 0.8, 0.9) - 0.72).abs() < 1e-15);
        assert!((signal_likelihood(A, 1, 0.8, 0.9) - 0.1).abs() < 1e-15);
        assert!((signal_likelihood(A, 0, 0.3, 0.9) - 0.1).abs() < 1e-15);
        assert!((signal_likelihood(N, 1, 0.8, 0.9) - 0.18).abs() < 1e-15);
    }

    #[test]
    fn joint_examples() {
        let p = params(&[0.8, 0.7], &[0.9, 0.6], 0.5);
        let oracle = joint_oracle(&[A, A], 1, &[0.8, 0.7], &[0.9, 0.6], 0.5);
        assert!((oracle - 0.02).abs() < 1e-15);
        assert!((joint_probability(&[A, A], 1, &p) - 0.02).abs() < 1e-15);

        let oracle = joint_oracle(&[P, N], 1, &[0.8, 0.7], &[0.9, 0.6], 0.5);
        assert!((oracle - 0.0648).abs() < 1e-15);
        assert!((joint_probability(&[P, N], 1, &p) - 0.0648).abs() < 1e-15);

        let empty = params(&[], &[], 0.3);
        assert!((joint_probability(&[], 1, &empty) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn posterior_examples() {
        let p = params(&[0.8, 0.7], &[0.9, 0.6], 0.5);
        assert!((posterior(&[A, A], &p) - 0.5).abs() < 1e-15);
        let expect: f64 = 0.0648 / (0.0648 + 0.0378);
        assert!((expect - 0.631_578_947_368_421).abs() < 1e-12);
        assert!((posterior(&[P, N], &p) - expect).abs() < 1e-12);

        let coin = params(&[0.5], &[0.9], 0.5);
        for v in [P, N, A] {
            assert!((posterior(&[v], &coin) - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn non_uniform_prior_passes_through_abstains() {
        let p = params(&[0.9, 0.9], &[0.5, 0.5], 0.2);
        assert!((posterior(&[A, A], &p) - 0.2).abs() < 1e-12);
    }

    #[test]
    fn params_are_clamped() {
        let p = params(&[1.0, 0.0], &[1.0, 0.0], 1.0);
        assert_eq!(p.alpha, vec![1.0 - PARAM_EPS, PARAM_EPS]);
        assert_eq!(p.beta, vec![1.0 - PARAM_EPS, PARAM_EPS]);
        assert_eq!(p.prior_pos, 1.0 - PARAM_EPS);
        assert!(LabelModelParams::new(vec![1.2], vec![0.5], 0.5).is_err());
        assert!(LabelModelParams::new(vec![0.5], vec![], 0.5).is_err());
    }

    #[test]
    fn fit_rejects_empty() {
        let m = SignalMatrix::from_rows(&[]).unwrap();
        assert!(fit(&m, &FitConfig::default()).is_err());
        let m = SignalMatrix::from_rows(&[vec![], vec![]]).unwrap();
        assert!(fit(&m, &FitConfig::default()).is_err());
    }

    #[test]
    fn fitted_beta_is_coverage() {
        let mut rows = Vec::new();
        for n in 0..100 {
            let first = if n < 30 {
                A
            } else if n % 2 == 0 {
                P
            } else {
                N
            };
            let second = if n % 3 == 0 { P } else { N };
            rows.push(vec![first, second]);
        }
        let m = SignalMatrix::from_rows(&rows).unwrap();
        let (p, _) = fit(&m, &FitConfig::default()).unwrap();
        assert_eq!(p.beta[0], 0.7);
        assert_eq!(p.beta[1], 1.0 - PARAM_EPS);
    }

    #[test]
    fn symmetric_single_source() {
        let rows: Vec<_> = (0..100).map(|n| vec![if n < 50 { P } else { N }]).collect();
        let m = SignalMatrix::from_rows(&rows).unwrap();
        let (p, report) = fit(&m, &FitConfig::default()).unwrap();
        assert_eq!(p.beta[0], 1.0 - PARAM_EPS);
        assert!(p.alpha[0] > 0.5);
        assert!((p.alpha[0] - INIT_ALPHA).abs() < 1e-12);
        assert!(report.converged);
        // likelihood does not depend on alpha here
        let flat = params(&[0.55], &p.beta, 0.5);
        assert!((log_likelihood(&m, &flat) - report.final_log_likelihood).abs() < 1e-9);
    }

    #[test]
    fn em_trace_is_monotone_and_reported() {
        let rows: Vec<Vec<Vote>> = (0..300)
            .map(|n| {
                vec![
                    if n % 10 < 8 { P } else { N },
                    if n % 7 < 5 {
                        P
                    } else if n % 7 == 5 {
                        A
                    } else {
                        N
                    },
                    if n % 5 < 2 { N } else { P },
                ]
            })
            .collect();
        let m = SignalMatrix::from_rows(&rows).unwrap();
        let (_, report) = fit(&m, &FitConfig::default()).unwrap();
        assert_eq!(report.log_likelihood_trace.len(), report.iterations + 1);
        for w in report.log_likelihood_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-10, "{} -> {}", w[0], w[1]);
        }
        assert_eq!(
            *report.log_likelihood_trace.last().unwrap(),
            report.final_log_likelihood
        );
    }

    #[test]
    fn max_iter_zero_returns_initialization() {
        let m = SignalMatrix::from_rows(&[vec![P, N], vec![P, P]]).unwrap();
        let cfg = FitConfig {
            max_iter: 0,
            ..FitConfig::default()
        };
        let (p, report) = fit(&m, &cfg).unwrap();
        assert_eq!(p.alpha, vec![INIT_ALPHA; 2]);
        assert_eq!(report.iterations, 0);
        assert!(!report.converged);
    }

    #[test]
    fn label_corpus_matches_oracle() {
        let rows = vec![vec![P, N, A], vec![A, A, A], vec![P, P, N], vec![P, N, A]];
        let m = SignalMatrix::from_rows(&rows).unwrap();
        let (alpha, beta) = ([0.9, 0.6, 0.75], [0.8, 0.5, 0.3]);
        let p = params(&alpha, &beta, 0.5);
        let labels = label_corpus(&m, &p);
        assert_eq!(labels[1], 0.5);
        assert_eq!(labels[0], labels[3]);
        for (row, &got) in rows.iter().zip(&labels) {
            let j1 = joint_oracle(row, 1, &alpha, &beta, 0.5);
            let j0 = joint_oracle(row, 0, &alpha, &beta, 0.5);
            assert!((got - j1 / (j0 + j1)).abs() < 1e-12);
        }
    }

    #[test]
    fn model_file_round_trip_and_lookup() {
        let sources = vec!["a".to_string(), "b".to_string()];
        let p = params(&[0.8, 0.6], &[0.9, 0.5], 0.5);
        let file = ModelFile::new(&sources, &p, None);
        let text = serde_json::to_string(&file).unwrap();
        let back: ModelFile = serde_json::from_str(&text).unwrap();
        assert_eq!(back.params_for(&sources).unwrap(), p);
        let swapped = vec!["b".to_string(), "a".to_string()];
        assert_eq!(back.params_for(&swapped).unwrap().alpha, vec![0.6, 0.8]);
        assert!(back.params_for(&["c".to_string()]).is_err());
    }
}
