use thiserror::Error;

/// Error classes surfaced by every fallible operation in the crate.
///
/// The CLI maps these onto exit codes, so new variants must pick one of the
/// existing classes.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A size or bit budget was exceeded (sieve limit, denominator growth, ...).
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    /// The available precision cannot certify the requested quantity.
    #[error("insufficient precision: {0}")]
    Precision(String),
    /// Inputs violate a mathematical precondition of the operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// An index lies outside the range a table was built for.
    #[error("out of range: {0}")]
    Range(String),
    /// An iterative numerical method failed to converge.
    #[error("numerical failure: {0}")]
    Numeric(String),
    /// A configuration document failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}
