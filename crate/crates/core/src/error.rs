//! Error type shared across the crate.

use thiserror::Error;

/// Errors reported by construction, evaluation, and integration routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("group dimension must be at least 2, got n = {0}")]
    InvalidDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("operands belong to different representations")]
    RepresentationMismatch,

    #[error("operator is not hermitian (residual {residual:.3e})")]
    NonHermitian { residual: f64 },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("group parameter at the chart singularity (|xi| = pi/2 within {0:.1e})")]
    ChartSingularity(f64),

    #[error("step size underflow at t = {t:.6e}")]
    StepSizeUnderflow { t: f64 },

    #[error("state became non-finite at t = {t:.6e}")]
    NonFiniteState { t: f64 },

    #[error("Hilbert dimension {dim} exceeds the dense-oracle cap {max}")]
    DimensionCap { dim: usize, max: usize },

    #[error("operation not supported for n = {0}")]
    UnsupportedDimension(usize),

    #[error("need at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },

    #[error("Hamiltonian must be a degree-1 generator polynomial for this check")]
    NotLinear,

    #[error("path is not smooth enough (Richardson ratio {ratio:.3})")]
    NonSmoothPath { ratio: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}
