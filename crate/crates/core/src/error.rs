use thiserror::Error;

/// Errors raised by the solver and verification harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("inadmissible exponent q = {q}: need q > 2d/(d+alpha) = {bound}")]
    Admissibility { q: f64, bound: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("grid mismatch: operands live on different radial grids")]
    GridMismatch,

    #[error("kernel assembly failed: {0}")]
    Assembly(String),

    #[error("calibration failed: residual {residual:.3e} exceeds {limit:.1e}")]
    Calibration { residual: f64, limit: f64 },

    #[error("quadrature failed at r = {radius}: {reason}")]
    Quadrature { radius: f64, reason: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
