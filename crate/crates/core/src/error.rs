use thiserror::Error;

use crate::modes::Parity;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("quadrature failure: panel budget exhausted (partial value {partial}, error estimate {error_estimate})")]
    QuadratureFailure { partial: f64, error_estimate: f64 },

    #[error("integrand singularity at x = {x}")]
    IntegrandSingularity { x: f64 },

    #[error("insufficient averaging window: {cycles} cycles (need at least 4)")]
    InsufficientAveragingWindow { cycles: usize },

    #[error("invalid bracket [{lo}, {hi}]: f(lo) = {f_lo}, f(hi) = {f_hi}")]
    InvalidBracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },

    #[error("root solver did not converge in {iterations} iterations")]
    RootNotConverged { iterations: usize },

    #[error("invalid frequency {omega}")]
    InvalidFrequency { omega: f64 },

    #[error("box too small for mode: B = {b} >= L = {length}")]
    BoxTooSmall { b: f64, length: f64 },

    #[error("eigenvalue solve failure for parity j = {}, n = {n}", .parity.index())]
    EigenSolveFailure { parity: Parity, n: usize },

    #[error("x = {x} lies outside the box [-{half}, {half}]")]
    OutsideBox { x: f64, half: f64 },

    #[error("invalid scale {value}")]
    InvalidScale { value: f64 },

    #[error("negative density {value} at x = {x}")]
    NegativeDensity { x: f64, value: f64 },

    #[error("divergent bound: sampling function vanishes with non-zero slope at x = {x}")]
    DivergentBound { x: f64 },

    #[error("evaluation on singular point x = {x}")]
    SingularPoint { x: f64 },

    #[error("non-1/L behavior: fit residual {residual} exceeds 10% of spread {spread}")]
    NonInverseL { residual: f64, spread: f64 },

    #[error("spectrum gap: {0}")]
    SpectrumGap(String),

    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter { name: &'static str, value: f64, reason: &'static str },

    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl Error {
    pub(crate) fn param(name: &'static str, value: f64, reason: &'static str) -> Self {
        Error::InvalidParameter { name, value, reason }
    }
}
