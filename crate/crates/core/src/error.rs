use thiserror::Error;

use crate::world::AgentId;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown agent id {0}")]
    UnknownAgent(AgentId),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("incomplete run: {0}")]
    IncompleteRun(String),

    #[error("insufficient data: need at least {needed} samples, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, SimError>;
