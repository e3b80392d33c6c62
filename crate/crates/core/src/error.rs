use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the aggregation pipeline.
///
/// Variants are split into input problems (bad data, bad config, violated
/// preconditions) and runtime failures (I/O, numerical breakdown); the CLI
/// maps the former to exit code 1 and the latter to exit code 2.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}: {message}")]
    Malformed {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("length mismatch: expected {expected} {what}, got {actual}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("source '{0}' has no present scores")]
    NoScores(String),

    #[error("AUC undefined: {0}")]
    AucUndefined(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite loss at epoch {epoch}: {value}")]
    NonFinite { epoch: usize, value: f64 },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Stage(Box<crate::pipeline::StageError>),

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for errors caused by the caller's input rather than the environment.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Stage(s) => s.source.is_validation(),
            Error::Io { .. } | Error::NonFinite { .. } => false,
            _ => true,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
