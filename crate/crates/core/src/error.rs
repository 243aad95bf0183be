use alloc::string::String;

/// Errors raised by the estimation core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("{0} is not symmetric")]
    NotSymmetric(&'static str),
    #[error("{0} is not positive semi-definite (min eigenvalue {1:e})")]
    NotPsd(&'static str, f64),
    #[error("predicted innovation variance must be positive, got {0}")]
    NonPositiveVariance(f64),
    #[error("at least one detection is required, got {0}")]
    NoDetections(usize),
    #[error("invalid mode distribution: {0}")]
    InvalidDistribution(String),
    #[error("{0}")]
    InvalidParameter(String),
}

pub type Result<T> = core::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            actual,
        })
    }
}
