use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Arguments violate an operation's documented preconditions.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Two components that must agree (for example a loss and the entropy
    /// claimed for it) were found inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// Optimization diverged or otherwise failed to produce a usable model.
    #[error("training failure: {0}")]
    Training(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
