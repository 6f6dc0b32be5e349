//! Error type shared by every module, with the CLI exit-code contract.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix/vector dimensions.
    #[error("shape error: {0}")]
    Shape(String),

    /// Input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A Loewner-order precondition (0 <= S <= T <= I, decreasing chain, ...) failed.
    #[error("order error: {0}")]
    Order(String),

    /// Index outside the declared horizon or chain length.
    #[error("range error: {0}")]
    Range(String),

    /// Iterative numerics failed to converge.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// The rotation step size is outside the validity regime of the construction.
    #[error("theta too large: {0}")]
    ThetaTooLarge(String),

    /// The requested target angle cannot be reached with any admissible step size.
    #[error("target unreachable: {0}")]
    Unreachable(String),

    /// A constructed chain failed its own verification.
    #[error("construction error: {0}")]
    Construction(String),

    /// The chain has too few terms for the requested check.
    #[error("chain too short: {0}")]
    ChainTooShort(String),

    /// The trace was recorded without the data this operation needs.
    #[error("missing data: {0}")]
    MissingData(String),

    /// The spectrum has no gap below 1, so the norm-convergence bound does not apply.
    #[error("no spectral gap: {0}")]
    NoGap(String),

    /// Malformed input file.
    #[error("parse error: {0}")]
    Parse(String),

    /// Invalid configuration or CLI arguments.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Exit codes: 0 success, 2 validation error, 3 numerical failure, 4 IO.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Shape(_)
            | Error::Domain(_)
            | Error::Order(_)
            | Error::Range(_)
            | Error::ChainTooShort(_)
            | Error::MissingData(_)
            | Error::NoGap(_)
            | Error::Parse(_)
            | Error::Unreachable(_)
            | Error::Validation(_) => 2,
            Error::Numerical(_) | Error::ThetaTooLarge(_) | Error::Construction(_) => 3,
            Error::Io { .. } => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
