use thiserror::Error;

use crate::model::Violation;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed instance: {0}")]
    Parse(String),

    #[error("instance failed validation with {} violation(s)", .0.len())]
    Invalid(Vec<Violation>),

    #[error("instance is not layered: {0}")]
    NotLayered(String),

    #[error("instance has multi-period transitions; expand bridges first")]
    NotUnitTime,

    #[error("instance already contains bridge nodes and multi-period transitions")]
    AlreadyExpanded,

    #[error("state space too large: {states} joint states exceed cap {cap}")]
    Capacity { states: u128, cap: u128 },

    #[error("linear program is {0}")]
    Lp(String),

    #[error("flow decomposition failed: {0}")]
    Decomposition(String),

    #[error("policy construction failed: {0}")]
    Policy(String),

    #[error("invalid argument: {0}")]
    Argument(String),
}

impl From<serde_json::Error> for Error {
    fn from(err: serde_json::Error) -> Self {
        Error::Parse(err.to_string())
    }
}
