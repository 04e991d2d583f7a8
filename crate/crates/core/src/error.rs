use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (dimension or index mismatch).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Invalid configuration; `field` names the offending key.
    #[error("invalid configuration `{field}`: {message}")]
    Config { field: String, message: String },

    /// The adjacency space of the queried state is empty.
    #[error("no adjacent state")]
    NoAdjacentState,

    #[error("graph error: {0}")]
    Graph(String),

    /// A value or loss left the finite range during training.
    #[error("divergence at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    /// Calling an operation in the wrong lifecycle state, e.g. stepping a finished episode.
    #[error("usage error: {0}")]
    Usage(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }

    pub fn contract(message: impl Into<String>) -> Self {
        Error::Contract(message.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
