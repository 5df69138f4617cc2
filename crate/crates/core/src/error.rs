use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("grid needs at least {min} points per axis, got {got}")]
    GridTooSmall { min: usize, got: usize },

    #[error("unsupported grid dimension {0} (expected 1 or 2)")]
    UnsupportedDimension(usize),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("wavevector component {k} outside representable band [{lo}, {hi}]")]
    BandLimit { k: i64, lo: i64, hi: i64 },

    #[error("direction vector must be finite and nonzero")]
    InvalidDirection,

    #[error("observable wavevector must be nonzero")]
    ZeroWavevector,

    #[error("all {total} grid points excluded from the average")]
    DegenerateAverage { total: usize },

    #[error("matrix {0:?} is not unimodular (det != 1)")]
    NotUnimodular([[i64; 2]; 2]),

    #[error("matrix {0:?} is not hyperbolic (|trace| <= 2)")]
    NotHyperbolic([[i64; 2]; 2]),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("step {n} outside cached range 0..={n_max}")]
    StepOutOfRange { n: usize, n_max: usize },

    #[error("unitarity check failed at n = {n}: roundtrip error {error:e} exceeds {eps:e}")]
    Unitarity { n: usize, error: f64, eps: f64 },

    #[error("under-determined fit: {points} points for {params} parameters")]
    UnderDetermined { points: usize, params: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
