use std::io;

use thiserror::Error;

/// Errors produced by the decomposition, bound and RPCA routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions are incompatible with the requested operation.
    #[error("shape error: {0}")]
    Shape(String),

    /// A numeric parameter is outside its admissible range.
    #[error("parameter error: {0}")]
    Parameter(String),

    /// A matrix entry or computed value is NaN or infinite.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// A deterministic bound was requested for a split whose leading block is rank deficient.
    #[error("bound not applicable: {0}")]
    BoundInapplicable(String),

    /// An iterative method produced NaN or otherwise broke down.
    #[error("numerical failure: {0}")]
    Numerical(String),

    /// Malformed matrix file.
    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Short machine-readable tag for the error family.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Shape(_) => "shape",
            Error::Parameter(_) => "parameter",
            Error::NonFinite(_) => "non_finite",
            Error::BoundInapplicable(_) => "bound_inapplicable",
            Error::Numerical(_) => "numerical",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
