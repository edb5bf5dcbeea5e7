use thiserror::Error;

/// Errors raised by the evolutionary primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvoError {
    #[error("encoding violation: {0}")]
    Encoding(String),

    #[error("insufficient population: need at least {needed} evaluated individuals, have {available}")]
    InsufficientPopulation { needed: usize, available: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("precondition violated: {0}")]
    Precondition(String),
}

impl EvoError {
    pub(crate) fn encoding(msg: impl Into<String>) -> Self {
        EvoError::Encoding(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        EvoError::InvalidConfig(msg.into())
    }
}

pub type Result<T, E = EvoError> = std::result::Result<T, E>;
