use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the liquid pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid liquid: {0}")]
    Validation(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("time went backwards: {time} ms precedes {last} ms")]
    NonMonotonicTime { time: f64, last: f64 },

    #[error("calibration failed: {0}")]
    Calibration(String),

    #[error("stale swap decision: {0}")]
    StaleDecision(String),

    #[error("{0}")]
    Convergence(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
