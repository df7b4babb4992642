use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("malformed configuration: {0}")]
    Parse(String),

    /// Validation failure tied to one configuration key.
    #[error("{key}: {message}")]
    Config { key: String, message: String },

    #[error(transparent)]
    Core(#[from] d2therm_core::Error),

    #[error("{failed} of {total} trajectories failed (more than 1%); first: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl SimError {
    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        SimError::Config {
            key: key.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, SimError>;
