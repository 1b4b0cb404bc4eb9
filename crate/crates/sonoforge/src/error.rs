use std::io;
use std::path::{Path, PathBuf};

/// Errors raised by file formats and commands.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] sonoforge_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}: malformed file: {1}")]
    Format(PathBuf, String),
    #[error("{0}: unsupported format: {1}")]
    Unsupported(PathBuf, String),
    #[error("{0}: truncated: {1}")]
    Truncated(PathBuf, String),
    #[error("{0}: schema error: {1}")]
    Schema(PathBuf, String),
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{0}")]
    MissingFeatures(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Failed(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    /// Process exit code: 2 for usage and validation failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use sonoforge_core::Error as C;
        match self {
            Error::Config(_) | Error::Usage(_) => 2,
            Error::Core(C::Config(_) | C::Geometry(_)) => 2,
            _ => 1,
        }
    }
}
