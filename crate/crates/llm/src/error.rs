use thiserror::Error;

pub type Result<T, E = LlmError> = std::result::Result<T, E>;

/// Failure talking to a completion endpoint, cache or script.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum TransportError {
    #[error("endpoint returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("network error: {0}")]
    Network(String),
    #[error("no cached response for request {0}")]
    CacheMiss(String),
    #[error("scripted failure: {0}")]
    Scripted(String),
    #[error("could not decode endpoint response: {0}")]
    Decode(String),
    #[error("cache i/o error: {0}")]
    Io(String),
}

impl TransportError {
    /// Worth another attempt after a pause.
    pub fn is_transient(&self) -> bool {
        match self {
            TransportError::Network(_) => true,
            TransportError::Http { status, .. } => *status == 429 || *status >= 500,
            _ => false,
        }
    }
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("template `{template}` uses placeholder {{{name}}} with no value")]
    MissingPlaceholder { template: String, name: String },
    #[error("event trigger `{0}` not found in text")]
    EventNotFound(String),
    #[error("event triggers must be non-empty")]
    EmptyEvent,
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error("invalid mock script: {0}")]
    Script(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
