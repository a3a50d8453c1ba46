use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A matrix argument left the domain of the operation (e.g. not positive definite).
    #[error("domain error: {message} (smallest eigenvalue {smallest_eigenvalue:e})")]
    Domain {
        message: String,
        smallest_eigenvalue: f64,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn argument(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
