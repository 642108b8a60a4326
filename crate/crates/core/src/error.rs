use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: String, got: String },

    #[error("operator payload is not symmetric")]
    NonSymmetric,

    #[error("operator payload is singular or not positive definite")]
    SingularPayload,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("infeasible point: R(x) = {norm} exceeds radius {radius}")]
    Infeasible { norm: f64, radius: f64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("missing column in CSV record: {0}")]
    MissingColumn(String),

    #[error("rate fit requires at least {required} uncensored points, got {got}")]
    NotEnoughPoints { required: usize, got: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
