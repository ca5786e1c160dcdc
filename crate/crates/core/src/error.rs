use thiserror::Error;

/// Errors raised across the model and simulation layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhbmError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dense simulation of {requested} qubits exceeds the cap of {cap}")]
    DenseCapExceeded { requested: usize, cap: usize },

    #[error("wrong parameter count: expected {expected}, got {got}")]
    ParameterCount { expected: usize, got: usize },

    #[error("unstable Hamiltonian: {0}")]
    Unstable(String),

    #[error("numerical abort at step {step}: {reason}")]
    NumericalAbort { step: usize, reason: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, QhbmError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(QhbmError::DimensionMismatch { expected, got })
    }
}
