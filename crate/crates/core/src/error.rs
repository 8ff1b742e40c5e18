use thiserror::Error;

/// Errors raised by the lattice, energy and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },
    #[error("invalid disorder distribution: {0}")]
    InvalidDistribution(String),
    #[error("point {0:?} lies outside the disorder support")]
    OutOfSupport(Vec<f64>),
    #[error("site {0:?} lies outside the sampled disorder box")]
    SiteOutOfBox(Vec<i64>),
    #[error("non-finite field value at index {0}")]
    NonFinite(usize),
    #[error("shape mismatch: {0}")]
    Mismatch(String),
    #[error("not enough data: {0}")]
    InsufficientData(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
    #[error("malformed snapshot: {0}")]
    Snapshot(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
