//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("invalid network: {0}")]
    InvalidNetwork(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("invalid maze: {0}")]
    InvalidMaze(String),

    #[error("episode already terminated at step {0}")]
    EpisodeDone(usize),

    #[error("replay buffer is empty")]
    EmptyBuffer,

    #[error("empty batch")]
    EmptyBatch,

    #[error("need at least {needed} records, got {got}")]
    TooFewRecords { needed: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
