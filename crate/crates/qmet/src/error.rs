//! Error types shared across the crate.

use thiserror::Error;

/// Errors raised by scene construction, linear algebra, optimization and
/// the CLI layer.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid scenario or command configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// A physical or mathematical precondition was violated.
    #[error("domain error: {0}")]
    Domain(String),

    /// A matrix factorization or other numerical step failed.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The Fisher matrix is singular; the parameters cannot be jointly
    /// estimated. Carries the (approximate) null-space direction.
    #[error("parameters not identifiable: {reason}")]
    Unidentifiable { reason: String, null_vector: Vec<f64> },

    /// The Armijo line search could not find an acceptable step.
    #[error("line search stalled: {0}")]
    LineSearchStall(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code: 2 for configuration problems, 3 for numerical ones.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Numerical(_)
            | Error::Unidentifiable { .. }
            | Error::LineSearchStall(_) => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
