use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum QstError {
    #[error("resource limit: {qubits} qubits exceeds the configured maximum of {max}")]
    ResourceLimit { qubits: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("outcome {outcome:+} has probability {probability:.3e}, below the forcing threshold")]
    ZeroProbability { outcome: i8, probability: f64 },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("numerical breakdown: {0}")]
    Numerical(String),
}

impl QstError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        QstError::InvalidArgument(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        QstError::InvalidState(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, QstError>;
