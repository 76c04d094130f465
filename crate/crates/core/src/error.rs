//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by model validation, exact computation and experiments.
#[derive(Debug, Error)]
pub enum Error {
    /// A model failed validation (non-stochastic row, bad variance, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An operation was called with arguments outside its domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A computation could not be carried out at the requested precision.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// An observation fell outside the constraint set the model guarantees
    /// its bounds on.
    #[error("observation outside constraint set: {0}")]
    ObservationSupport(String),

    /// Configuration file problems (unknown keys, missing seed, ...).
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
