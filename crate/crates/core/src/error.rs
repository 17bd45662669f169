use thiserror::Error;

/// Errors produced by the numeric kernels, the fusion layer and the training loop.
#[derive(Debug, Error)]
pub enum MbafError {
    #[error("shape mismatch in {op}: expected {expected}, got {actual}")]
    Shape {
        op: &'static str,
        expected: String,
        actual: String,
    },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("non-finite value: {0}")]
    Numeric(String),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MbafError>;

pub(crate) fn shape_err(op: &'static str, expected: impl ToString, actual: impl ToString) -> MbafError {
    MbafError::Shape {
        op,
        expected: expected.to_string(),
        actual: actual.to_string(),
    }
}

pub(crate) fn param_err(msg: impl Into<String>) -> MbafError {
    MbafError::Param(msg.into())
}
