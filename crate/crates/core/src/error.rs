use thiserror::Error;

/// Errors shared by every module of the laboratory.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension N = {0} is not supported (need N >= 3)")]
    Dimension(usize),

    #[error("inadmissible parameters: {0}")]
    Admissibility(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("non-finite value encountered: {0}")]
    Numerics(String),

    #[error("stencil does not fit: {0}")]
    Stencil(String),

    #[error("exponent {exponent} exceeds the ladder cap {cap}")]
    ExponentCap { exponent: f64, cap: f64 },

    #[error("linear solve failed: {0}")]
    Solver(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn ensure_finite(value: f64, what: &str) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::Numerics(format!("{what} evaluated to {value}")))
    }
}
