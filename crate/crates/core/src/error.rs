use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The covariance matrix does not have the symmetric two-mode block form.
    #[error("unsupported state: {0}")]
    UnsupportedState(String),

    /// A radicand or spectrum came out unphysical beyond round-off.
    #[error("numeric domain error: {0}")]
    NumericDomain(String),

    #[error("quadrature failed to converge: {0}")]
    Quadrature(String),

    #[error("eigen-solver failure: {0}")]
    Eigen(String),

    /// Invalid configuration, named by the offending field.
    #[error("invalid `{field}`: {message}")]
    Usage { field: String, message: String },

    #[error("conflicting options: {0}")]
    Conflict(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn usage(field: &str, message: impl Into<String>) -> Self {
        Error::Usage {
            field: field.to_string(),
            message: message.into(),
        }
    }
}
