use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("duplicate points: ids {first} and {second} coincide")]
    DuplicatePoints { first: usize, second: usize },

    #[error("instance too large for exhaustive search: {size} exceeds limit {limit}")]
    SizeGuard { size: usize, limit: usize },

    #[error("unknown point id {0}")]
    UnknownId(usize),

    #[error("{path}: row {row}, column {column}: {message}")]
    Parse {
        path: PathBuf,
        row: usize,
        column: usize,
        message: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors caused by the data itself rather than by parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::DuplicatePoints { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Csv { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}
