use thiserror::Error;

/// Errors raised by the recalibration library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("negative weight {weight} at index {index}")]
    NegativeWeight { index: usize, weight: f64 },

    #[error("weights sum to zero")]
    ZeroMass,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for failures of the numerics (factorization, degenerate bandwidth
    /// heuristics) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_) | Error::DegenerateData(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
