use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error(
        "truncation too small: tail mass {tail:.3e} exceeds tolerance {tol:.3e} (dim = {dim}, need dim >= {required})"
    )]
    TruncationTooSmall {
        dim: usize,
        tail: f64,
        tol: f64,
        required: usize,
    },

    #[error("truncation overflow: {mass:.3e} of probability mass falls outside dim = {dim}")]
    TruncationOverflow { dim: usize, mass: f64 },

    #[error("state is not normalized (norm squared = {0})")]
    NotNormalized(f64),

    #[error("impossible outcome: probability {0:.3e}")]
    ImpossibleOutcome(f64),

    #[error("series did not converge: {0}")]
    NonConvergence(String),

    #[error("singular matrix: zero diagonal entry at index {0}")]
    Singular(usize),

    #[error("grid spacing {spacing:.3e} too coarse, must be below {required:.3e}")]
    GridTooCoarse { spacing: f64, required: f64 },

    #[error("k_max = {k_max} insufficient: estimated truncated tail {tail:.3e} exceeds tolerance {tol:.3e}")]
    InsufficientKmax { k_max: usize, tail: f64, tol: f64 },

    #[error("sampling failure: {0}")]
    Sampling(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
