use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("ingestion error in {path}: {message}")]
    Ingest { path: PathBuf, message: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("dimension mismatch: expected {expected} features, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn ingest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Ingest {
            path: path.into(),
            message: message.into(),
        }
    }
}
