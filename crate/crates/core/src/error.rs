use std::path::PathBuf;

use thiserror::Error;

use crate::imaging::ImageError;
use crate::inn::InnError;
use crate::optics::OpticsError;
use crate::wavefront::PsfError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Top-level error, grouping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Optics(#[from] OpticsError),
    #[error(transparent)]
    Psf(#[from] PsfError),
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Inn(#[from] InnError),
    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Coarse classification used by front-ends to pick exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    Numeric,
    Io,
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Optics(e) => e.class(),
            Error::Psf(e) => e.class(),
            Error::Image(e) => e.class(),
            Error::Inn(e) => e.class(),
            Error::UnknownStrategy { .. } => ErrorClass::Validation,
            Error::Io { .. } => ErrorClass::Io,
        }
    }
}
