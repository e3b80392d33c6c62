//! Reference aggregators the label model is compared against.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal_store::Corpus;
use crate::unification::{SignalMatrix, Vote};

/// How per-sample probabilistic labels are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Model,
    Average,
    Majority,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Model => "model",
            Method::Average => "average",
            Method::Majority => "majority",
        })
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "model" => Ok(Method::Model),
            "average" => Ok(Method::Average),
            "majority" => Ok(Method::Majority),
            other => Err(Error::Config(format!("unknown label method '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregationResult {
    pub p_pos: Vec<f64>,
    pub method: Method,
}

/// Mean of the present raw scores.
pub fn average_signal<'a>(scores: impl IntoIterator<Item = &'a f64>) -> Option<f64> {
    let (sum, n) = scores
        .into_iter()
        .fold((0.0, 0usize), |(s, n), &x| (s + x, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// 1.0 / 0.0 for a strict majority of non-abstain votes, 0.5 on ties and all-abstain.
pub fn major_vote(votes: &[Vote]) -> f64 {
    let (pos, neg) = votes.iter().fold((0usize, 0usize), |(p, n), v| match v {
        Vote::Pos => (p + 1, n),
        Vote::Neg => (p, n + 1),
        Vote::Abstain => (p, n),
    });
    match pos.cmp(&neg) {
        std::cmp::Ordering::Greater => 1.0,
        std::cmp::Ordering::Less => 0.0,
        std::cmp::Ordering::Equal => 0.5,
    }
}

/// Average-signal labels for a whole corpus. A record without any score is an error.
pub fn average_corpus(corpus: &Corpus) -> Result<AggregationResult> {
    let p_pos = corpus
        .records()
        .iter()
        .map(|r| {
            average_signal(r.scores.values()).ok_or_else(|| {
                Error::Validation(format!("record '{}' has no scores to average", r.id))
            })
        })
        .collect::<Result<_>>()?;
    Ok(AggregationResult {
        p_pos,
        method: Method::Average,
    })
}

pub fn majority_corpus(matrix: &SignalMatrix) -> AggregationResult {
    AggregationResult {
        p_pos: matrix.rows().map(major_vote).collect(),
        method: Method::Majority,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal_store::SampleRecord;
    use Vote::{Abstain as A, Neg as N, Pos as P};

    #[test]
    fn average_examples() {
        assert!((average_signal(&[0.2, 0.4, 0.9]).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(average_signal(&[0.7]), Some(0.7));
        assert_eq!(average_signal(&[0.0, 1.0]), Some(0.5));
        assert_eq!(average_signal(&[]), None);
    }

    #[test]
    fn majority_examples() {
        assert_eq!(major_vote(&[P, P, N]), 1.0);
        assert_eq!(major_vote(&[P, N]), 0.5);
        assert_eq!(major_vote(&[A, A, A]), 0.5);
        assert_eq!(major_vote(&[N, A, A]), 0.0);
        assert_eq!(major_vote(&[]), 0.5);
    }

    #[test]
    fn average_corpus_reports_empty_record() {
        let c = Corpus::new(vec![
            SampleRecord::new("a").with_score("x", 0.2),
            SampleRecord::new("b"),
        ])
        .unwrap();
        assert!(average_corpus(&c).is_err());
    }

    #[test]
    fn method_parsing() {
        for m in [Method::Model, Method::Average, Method::Majority] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert!("vote".parse::<Method>().is_err());
    }
}
