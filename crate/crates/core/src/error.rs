use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),

    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("singular system (condition estimate {condition:.3e})")]
    Singular { condition: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("value {value} is not in the {bits}-bit alphabet")]
    NotInAlphabet { value: i64, bits: u32 },

    #[error("instance too large for exhaustive search: {0} candidates per user")]
    TooLarge(u128),

    #[error("missing calibration for {0}")]
    MissingCalibration(String),

    #[error("malformed input: {0}")]
    Malformed(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
