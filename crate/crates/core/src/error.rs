use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid batch: need at least 2 rows, got {rows}")]
    InvalidBatch { rows: usize },

    #[error("non-finite gradient in parameter group {group} ({name})")]
    NonFiniteGradient { group: usize, name: String },

    #[error("non-finite loss at iteration {iteration} (batch indices {batch:?})")]
    NonFiniteLoss { iteration: usize, batch: Vec<usize> },

    #[error("k-NN graph degenerate: every k in {k_candidates:?} leaves more than half of the pairs disconnected")]
    GraphDegenerate { k_candidates: Vec<usize> },

    #[error("config error: {0}")]
    Config(String),

    #[error("missing path: {}", .0.display())]
    MissingPath(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
