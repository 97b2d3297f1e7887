use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    /// The matrix handed in (or composed) has a negative eigenvalue.
    #[error("not a physical state: most negative eigenvalue is {min_eigenvalue:.6e}")]
    NotPhysical { min_eigenvalue: f64 },

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("invalid data: {0}")]
    Data(String),
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
