use std::path::PathBuf;

/// Errors raised by the simulator, the learners and the experiment tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// An argument fell outside the domain of a model function.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration value is invalid or inconsistent.
    #[error("invalid configuration: {0}")]
    Config(String),

    /// A raw action vector could not be decoded.
    #[error("cannot decode action: {0}")]
    Decode(String),

    /// Array or vector dimensions do not line up.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// The replay buffer holds fewer transitions than requested.
    #[error("replay buffer holds {available} transitions, {requested} requested")]
    InsufficientSamples { available: usize, requested: usize },

    /// A config or metrics file could not be parsed.
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
