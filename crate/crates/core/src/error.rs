use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Malformed or out-of-range input.
    #[error("invalid input: {0}")]
    Input(String),

    /// A dimension or count exceeds a configured limit.
    #[error("capacity exceeded: {what} = {requested} exceeds limit {limit}{}", hint.map(|h| format!(" ({h})")).unwrap_or_default())]
    Capacity {
        what: &'static str,
        requested: u128,
        limit: u128,
        hint: Option<&'static str>,
    },

    /// An operation was called on an object that does not satisfy its
    /// numerical precondition (e.g. exact recovery on a non-correctable code).
    #[error("precondition failed: {message}")]
    Precondition { message: String, residual: Option<f64> },

    /// Internal numerical breakdown (non-convergence, non-finite result).
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn capacity(what: &'static str, requested: u128, limit: u128) -> Self {
        Error::Capacity {
            what,
            requested,
            limit,
            hint: None,
        }
    }

    pub(crate) fn precondition(msg: impl Into<String>, residual: Option<f64>) -> Self {
        Error::Precondition {
            message: msg.into(),
            residual,
        }
    }
}
