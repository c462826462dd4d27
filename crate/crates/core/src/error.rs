use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: line {line}, column `{column}`: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },

    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },

    #[error("{path}: duplicate cell id `{id}` at line {line} (first seen at line {first_line})")]
    DuplicateCell {
        path: PathBuf,
        id: String,
        line: u64,
        first_line: u64,
    },

    #[error("cell `{cell}` has zero variance across genes; correlation is undefined")]
    ZeroVariance { cell: String },

    #[error("group `{group}` has {size} members, fewer than the {requested} requested")]
    GroupTooSmall {
        group: String,
        size: usize,
        requested: usize,
    },

    #[error("complex has {count} simplices, over the budget of {limit}")]
    SimplexBudget { count: usize, limit: usize },

    #[error("invalid distance matrix: {0}")]
    InvalidDistance(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("malformed artifact {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Whether the failure came from a resource limit rather than the data.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::SimplexBudget { .. })
    }
}
