use thiserror::Error;

/// Library-wide error type.
///
/// `Input` covers bad data handed to the library (unknown junctions,
/// malformed files, out-of-range values); `Internal` covers violated
/// invariants that indicate a bug rather than bad input.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("internal invariant violation: {0}")]
    Internal(String),
}

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub fn internal(msg: impl Into<String>) -> Self {
        Error::Internal(msg.into())
    }

    /// Process exit code the CLI maps this error to.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Input(_) => 1,
            Error::Internal(_) => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
