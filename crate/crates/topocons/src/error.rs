use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("{context}: {source}")]
    Data {
        context: String,
        #[source]
        source: topocons_core::Error,
    },
    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn data(context: impl Into<String>, source: topocons_core::Error) -> Self {
        Error::Data {
            context: context.into(),
            source,
        }
    }

    /// Process exit status: 1 for usage errors, 2 for everything data related.
    pub fn exit_code(&self) -> u8 {
        match self {
            Error::Usage(_) => 1,
            _ => 2,
        }
    }
}
