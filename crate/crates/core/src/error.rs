use thiserror::Error;

/// Errors raised by the numerical kernels and models.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("matrix is not symmetric positive definite: {0}")]
    NotSpd(String),
    #[error("{what} = {value} lies outside the tabulated range [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("block count mismatch: profile has {profile} blocks, input has {input}")]
    BlockMismatch { profile: usize, input: usize },
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
