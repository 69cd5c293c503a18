use thiserror::Error;

/// Errors raised by the simulation, filtering and I/O layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("numerical failure at step {step}: {msg}")]
    Numerical { step: usize, msg: String },
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn numerical(step: usize, msg: impl Into<String>) -> Self {
        Error::Numerical { step, msg: msg.into() }
    }

    /// Attach a step index to a numerical failure that was raised without one.
    pub fn at_step(self, step: usize) -> Self {
        match self {
            Error::Numerical { msg, .. } => Error::Numerical { step, msg },
            other => other,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
