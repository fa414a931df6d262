use std::io;
use std::path::{Path, PathBuf};

/// Errors from IO, file formats and the experiment harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] tlunet_core::Error),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Image { path: PathBuf, source: image::ImageError },
    /// Malformed input text (config, CSV, manifest); carries file and line.
    #[error("{0}")]
    Parse(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Self::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn format(path: impl AsRef<Path>, message: impl Into<String>) -> Self {
        Self::Format { path: path.as_ref().to_path_buf(), message: message.into() }
    }

    /// Process exit code: 1 validation/config, 2 IO, 3 numeric failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Core(tlunet_core::Error::Numeric(_)) => 3,
            Self::Core(_) | Self::Parse(_) | Self::Config(_) => 1,
            Self::Io { .. } | Self::Image { .. } | Self::Format { .. } => 2,
        }
    }
}

/// `std::fs` helpers that attach the path to errors.
pub(crate) mod fs {
    use super::{Error, Result};
    use std::path::Path;

    pub fn read(path: &Path) -> Result<Vec<u8>> {
        std::fs::read(path).map_err(|e| Error::io(path, e))
    }
    pub fn read_to_string(path: &Path) -> Result<String> {
        std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
    }
    pub fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
        std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
    pub fn create_dir_all(path: &Path) -> Result<()> {
        std::fs::create_dir_all(path).map_err(|e| Error::io(path, e))
    }
}
