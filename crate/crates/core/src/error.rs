//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A precondition on an argument was violated.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The inputs are outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// An iterative method failed to converge or produced non-finite values.
    #[error("numeric error: {0}")]
    Numeric(String),

    /// Configuration file problem, with the offending key and line when known.
    #[error("configuration error: {message}")]
    Config {
        message: String,
        key: Option<String>,
        line: Option<usize>,
    },

    /// A least-squares fit could not be carried out.
    #[error("fit error: {0}")]
    Fit(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric(msg.into())
    }

    pub fn config(message: impl Into<String>, key: Option<&str>, line: Option<usize>) -> Self {
        Error::Config {
            message: message.into(),
            key: key.map(str::to_owned),
            line,
        }
    }

    pub fn fit(msg: impl Into<String>) -> Self {
        Error::Fit(msg.into())
    }
}
