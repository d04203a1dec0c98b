use thiserror::Error;

/// Errors raised by the library's numerical and statistical operations.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} out of domain: {value}")]
    Domain { what: &'static str, value: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("operation requires a balanced design (all group sizes equal)")]
    UnbalancedDesign,

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid survey data: {0}")]
    InvalidSurvey(String),

    #[error("posterior under the improper prior is not proper for S = {successes}, |J| = {sample_size}")]
    ImproperPosterior { successes: usize, sample_size: usize },

    #[error("oracle scale limit exceeded: {0}")]
    ScaleExceeded(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(what: &'static str, value: f64) -> Error {
    Error::Domain { what, value }
}
