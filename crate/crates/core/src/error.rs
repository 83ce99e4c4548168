use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid request: {0}")]
    InvalidRequest(String),

    #[error("{kind} not found: {id}")]
    NotFound { kind: &'static str, id: String },

    #[error("conflict: {message}")]
    Conflict {
        message: String,
        /// Current state the caller collided with, when there is one to hand back.
        current: Option<serde_json::Value>,
    },

    #[error("a pipeline run is already in progress")]
    AlreadyRunning,

    #[error("provider error: {0}")]
    Provider(String),

    #[error("corrupt event log at sequence_no {sequence_no}: {reason} (last valid sequence_no: {last_valid})")]
    CorruptLog {
        sequence_no: u64,
        last_valid: u64,
        reason: String,
    },

    #[error("storage error: {0}")]
    Storage(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidRequest(message.into())
    }

    pub fn not_found(kind: &'static str, id: impl ToString) -> Self {
        Error::NotFound {
            kind,
            id: id.to_string(),
        }
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        Error::Conflict {
            message: message.into(),
            current: None,
        }
    }

    /// Stable machine-readable code used in API error documents.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidRequest(_) => "invalid_request",
            Error::NotFound { .. } => "not_found",
            Error::Conflict { .. } => "conflict",
            Error::AlreadyRunning => "already_running",
            Error::Provider(_) => "provider_error",
            Error::CorruptLog { .. } => "corrupt_log",
            Error::Storage(_) => "storage_error",
            Error::Serde(_) => "serialization_error",
            Error::Internal(_) => "internal_error",
        }
    }
}
