use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// A file that does not follow its documented layout.
    #[error("{}: {record}: {reason}", path.display())]
    Format {
        path: PathBuf,
        record: String,
        reason: String,
    },

    #[error("{}: manifest: {source}", path.display())]
    Manifest {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("epoch {epoch}, batch {batch}: {source}")]
    Numeric {
        epoch: usize,
        batch: usize,
        #[source]
        source: bbsp_core::Error,
    },

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Core(#[from] bbsp_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(
        path: impl Into<PathBuf>,
        record: impl Into<String>,
        reason: impl Into<String>,
    ) -> Self {
        Error::Format {
            path: path.into(),
            record: record.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code: 1 config, 2 data, 3 numeric failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Config(_) | Error::Core(bbsp_core::Error::InvalidConfig(_)) => 1,
            Error::Numeric { .. } | Error::Core(bbsp_core::Error::NonFinite(_)) => 3,
            _ => 2,
        }
    }
}
