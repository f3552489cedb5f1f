use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Pipeline failures, grouped by who has to fix them.
///
/// The CLI maps these onto its exit codes: 1 for user/config problems
/// (including unreadable inputs), 2 for bad data, 3 for backend failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{0}")]
    Data(String),
    #[error("backend error: {0}")]
    Backend(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Io { .. } => 1,
            Error::Data(_) => 2,
            Error::Backend(_) => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
