use std::net::IpAddr;

use evofarm_core::protocol::ProtocolError;
use evofarm_core::EvoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum FarmError {
    #[error("algorithm {0:?} not found")]
    NotFound(String),

    #[error("client {0} is not in the allowlist")]
    Forbidden(IpAddr),

    #[error("algorithm {0:?} already exists")]
    Conflict(String),

    #[error("{0}")]
    Invalid(String),

    #[error("lease on packet {0:?} has expired; fetch a new packet")]
    LeaseExpired(String),

    #[error("no work available yet; retry shortly")]
    Busy,

    #[error(transparent)]
    Protocol(#[from] ProtocolError),

    #[error(transparent)]
    Evo(#[from] EvoError),

    #[error("journal: {0}")]
    Io(#[from] std::io::Error),
}

impl FarmError {
    /// Stable machine-readable tag used in error bodies.
    pub fn kind(&self) -> &'static str {
        match self {
            FarmError::NotFound(_) => "not_found",
            FarmError::Forbidden(_) => "forbidden",
            FarmError::Conflict(_) => "conflict",
            FarmError::Invalid(_) | FarmError::Evo(_) => "validation",
            FarmError::LeaseExpired(_) => "lease_expired",
            FarmError::Busy => "busy",
            FarmError::Protocol(ProtocolError::Parse { .. }) => "parse",
            FarmError::Protocol(_) => "validation",
            FarmError::Io(_) => "internal",
        }
    }
}

pub type Result<T, E = FarmError> = std::result::Result<T, E>;
