use thiserror::Error;

/// Errors surfaced by the pricing and training routines.
#[derive(Debug, Error)]
pub enum PriceError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid time: t = {t} exceeds maturity T = {maturity}")]
    InvalidTime { t: f64, maturity: f64 },

    #[error("spot must be positive, got {0}")]
    NonPositiveSpot(f64),

    #[error("quadrature failed to converge: tail estimate {tail:.3e} above tolerance {tol:.3e}")]
    QuadratureFailure { tail: f64, tol: f64 },

    #[error("price {value} violates no-arbitrage bounds [{lower}, {upper}] beyond tolerance")]
    BoundViolation { value: f64, lower: f64, upper: f64 },

    #[error("point ({0}) is not on a boundary face")]
    NotABoundary(String),

    #[error("diverged: non-finite {0}")]
    Diverged(String),

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("model file error: {0}")]
    ModelFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, PriceError>;
