use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty index: nearest-neighbor index needs at least one point")]
    EmptyIndex,

    #[error("empty shape: chamfer distance needs two non-empty clouds")]
    EmptyShape,

    #[error("untrackable initialization: no points inside the first-frame box")]
    UntrackableInitialization,

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("malformed archive {}: {message} (offset {offset})", path.display())]
    Archive {
        path: PathBuf,
        offset: u64,
        message: String,
    },

    #[error("config: {0}")]
    Config(String),

    #[error("missing tracklet ids: {0}")]
    MissingIds(String),

    #[error("io error at {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Short machine-readable class, printed by the CLI on failure.
    pub fn class(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid-input",
            Error::EmptyIndex => "empty-index",
            Error::EmptyShape => "empty-shape",
            Error::UntrackableInitialization => "untrackable",
            Error::LengthMismatch(_) => "length-mismatch",
            Error::Archive { .. } => "archive",
            Error::Config(_) => "config",
            Error::MissingIds(_) => "missing-ids",
            Error::Io { .. } => "io",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
