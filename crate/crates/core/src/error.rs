use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum FoamError {
    #[error("shape mismatch in {op}: expected {expected:?}, got {actual:?}")]
    Shape {
        op: &'static str,
        expected: (usize, usize),
        actual: (usize, usize),
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("invalid config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("numerical divergence at step {step}: {what}")]
    Diverged { step: u64, what: String },

    #[error("optimizer state error: {0}")]
    State(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl FoamError {
    pub(crate) fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        FoamError::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, FoamError>;
