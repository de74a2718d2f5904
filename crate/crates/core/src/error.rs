use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Validation(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("dataset has no observations")]
    EmptyDataset,

    #[error("comparison graph is disconnected: {0}")]
    Disconnected(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error(
        "quadrature did not converge: achieved error {achieved:.3e}, requested {requested:.3e}"
    )]
    Quadrature { achieved: f64, requested: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Quadrature { .. } | Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
