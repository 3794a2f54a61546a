use thiserror::Error;

/// Errors raised by the simulation engine and its checkers.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a mathematical precondition (empty set, length mismatch, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is missing, unknown or out of range.
    #[error("configuration error: {0}")]
    Config(String),

    /// A bound checker was asked to verify a trajectory outside its scope.
    #[error("bound check refused: {0}")]
    Refused(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("toml error: {0}")]
    Toml(#[from] toml::de::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

pub(crate) fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}
