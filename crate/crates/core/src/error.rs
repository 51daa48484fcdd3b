use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("gamma function pole at {0}")]
    Pole(f64),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("order {order} requires gamma in {range}, got {gamma}")]
    OrderMismatch { order: u8, range: &'static str, gamma: f64 },
    #[error("gamma {0} is in the wrong range for this operation")]
    WrongRange(f64),
    #[error("resonant scattering exponent s = {0}")]
    Resonance(f64),
    #[error("fit residual {residual:e} above tolerance {tol:e}")]
    FitResidual { residual: f64, tol: f64 },
    #[error("ill-conditioned jet fit (condition number {0:e})")]
    IllConditioned(f64),
    #[error("conformal factor is not admissible: {0}")]
    NotAdmissible(String),
    #[error("grid too small: {0} nodes")]
    GridTooSmall(usize),
    #[error("series diverges at the boundary (coefficient {0:e} of a negative power)")]
    Divergent(f64),
    #[error("truncation degree too small: tail {tail:e} above {tol:e}")]
    Truncation { tail: f64, tol: f64 },
    #[error("iteration did not converge after {0} steps")]
    NoConvergence(usize),
    #[error("ODE integration failed: {0}")]
    Integration(String),
}

pub type Result<T> = std::result::Result<T, Error>;
