use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("regime violation: {0}")]
    Regime(String),

    #[error("divergent integral for {quantity}: {condition}")]
    Divergence { quantity: String, condition: String },

    #[error("quadrature did not converge for {0}")]
    Quadrature(String),

    #[error("step size violation: {0}")]
    StepSize(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("grid alignment: {0}")]
    Alignment(String),

    #[error("aliasing: {0}")]
    Aliasing(String),

    #[error("non-finite values after step {step} at z = {z}")]
    NonFinite { step: usize, z: f64 },

    #[error("block covariance is not positive semidefinite (min eigenvalue {min_eigenvalue:e})")]
    NotPositiveSemidefinite { min_eigenvalue: f64 },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("schedule violates {condition}: {detail}")]
    Schedule { condition: String, detail: String },

    #[error("resource ceiling exceeded: {0}")]
    ResourceCeiling(String),

    #[error("config: {0}")]
    Config(String),

    #[error("container format: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
