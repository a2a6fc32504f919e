use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("divergent second moment")]
    DivergentSecondMoment,

    #[error("intensity too large: expected {expected:.3e} jumps exceeds the limit {limit:.3e}")]
    IntensityTooLarge { expected: f64, limit: f64 },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("truncation overflow: order {order} exceeds the configured maximum {max}")]
    TruncationOverflow { order: usize, max: usize },

    #[error("past truncation {past} leaves tail fraction {fraction:.3e} above {tolerance:.1e}; need past >= {required:.6e}")]
    PastTooShort {
        past: f64,
        fraction: f64,
        tolerance: f64,
        required: f64,
    },

    #[error("series cutoff {cutoff} too small for tolerance {tolerance:.1e}; suggested cutoff {suggested}")]
    CutoffTooSmall {
        cutoff: usize,
        tolerance: f64,
        suggested: usize,
    },

    #[error("unstable time step dt = {dt:.6e}; the explicit scheme needs dt <= {limit:.6e}")]
    Stability { dt: f64, limit: f64 },

    #[error("picard iteration did not reach tolerance after {} iterations; differences {differences:?}", differences.len())]
    NotConverged { differences: Vec<f64> },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("non-finite statistic value for replica seed {seed}")]
    NonFinite { seed: u64 },

    #[error("lipschitz check failed: observed L = {observed_lipschitz:.6}, C = {observed_growth:.6} (declared L = {declared_lipschitz}, C = {declared_growth})")]
    LipschitzViolation {
        observed_lipschitz: f64,
        observed_growth: f64,
        declared_lipschitz: f64,
        declared_growth: f64,
    },

    #[error("internal error: {0}")]
    Internal(String),
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}
