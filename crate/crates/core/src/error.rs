use thiserror::Error;

/// Errors raised by estimation, screening, generation and I/O routines.
#[derive(Debug, Error)]
pub enum NjglError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("precision matrix for class {class} is not positive definite")]
    NotPositiveDefinite { class: usize },

    #[error("coupling constraint violated: residual {residual:.3e} exceeds {tolerance:.1e}")]
    Constraint { residual: f64, tolerance: f64 },

    #[error("eigendecomposition failed: {0}")]
    Eigen(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, NjglError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(NjglError::Domain(msg.into()))
}
