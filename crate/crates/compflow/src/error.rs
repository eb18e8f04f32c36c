//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by cone construction, integration, and pipeline plumbing.
#[derive(Debug, Error)]
pub enum Error {
    /// Two inputs that must share a dimension do not.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A NaN or infinity reached an operation that requires finite input.
    #[error("non-finite value in {context}")]
    NonFinite { context: &'static str },

    /// A matrix that must be invertible is singular or too ill-conditioned.
    #[error("singular or ill-conditioned matrix: {context}")]
    SingularMatrix { context: String },

    /// An operation that requires a nonempty point set received an empty one.
    #[error("empty point set: {context}")]
    EmptySet { context: &'static str },

    /// A run configuration failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A precondition on an operation argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Filesystem failure while writing artifacts.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// The run configuration is not valid TOML.
    #[error("config parse error: {0}")]
    ConfigParse(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
