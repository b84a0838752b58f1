use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the detection pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: no samples")]
    NoSamples { path: PathBuf },

    #[error("{path}: {bad} of {total} lines malformed (lines {lines:?})")]
    TooManyMalformed {
        path: PathBuf,
        bad: usize,
        total: usize,
        lines: Vec<usize>,
    },

    #[error("invalid screen configuration: {0}")]
    Screen(String),

    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training data: {0}")]
    Training(String),

    #[error("feature vector has {got} values, model expects {expected}")]
    FeatureLength { expected: usize, got: usize },

    #[error("event log line {line}: {msg}")]
    EventLog { line: usize, msg: String },

    #[error("deblur events overlap at index {0}")]
    OverlappingEvents(usize),

    #[error("dataset: {0}")]
    Dataset(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
