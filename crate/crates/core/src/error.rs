use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("logarithm domain error at x = {0}")]
    Domain(f64),

    #[error("zero norm input")]
    ZeroNorm,

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("time {t} outside history range [{start}, {end}]")]
    OutOfRange { t: f64, start: f64, end: f64 },

    #[error("fit window too short: {got} samples, need at least {need}")]
    WindowTooShort { got: usize, need: usize },

    #[error("fit window [{start}, {end}] is not in the long-time regime (t >= {min})")]
    WindowNotLongTime { start: f64, end: f64, min: f64 },

    #[error("grid mismatch between backends: {0}")]
    GridMismatch(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be positive and finite, got {value}"),
        })
    }
}

pub(crate) fn non_negative(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value >= 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: format!("must be non-negative and finite, got {value}"),
        })
    }
}
