//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not chain or do not match.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// Two objects were built from different network specifications.
    #[error("spec mismatch: {0}")]
    SpecMismatch(String),

    /// The operation is defined only for a restricted architecture
    /// (e.g. identity activation, two blocks, scalar output).
    #[error("unsupported: {0}")]
    Unsupported(String),

    /// A size cap was exceeded (substitution expansion, oracle regime).
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// Invalid run configuration.
    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
