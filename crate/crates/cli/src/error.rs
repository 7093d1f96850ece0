use std::path::PathBuf;

use aberrasim_core::error::ErrorClass;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),
    #[error("{0}")]
    Numeric(String),
    #[error(transparent)]
    Core(#[from] aberrasim_core::Error),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 validation, 3 numeric failure, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        let class = match self {
            CliError::Invalid(_) => ErrorClass::Validation,
            CliError::Numeric(_) => ErrorClass::Numeric,
            CliError::Core(e) => e.class(),
            CliError::Io { .. } => ErrorClass::Io,
        };
        match class {
            ErrorClass::Validation => 2,
            ErrorClass::Numeric => 3,
            ErrorClass::Io => 4,
        }
    }
}

macro_rules! from_module_error {
    ($($t:ty),*) => {
        $(impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Core(e.into())
            }
        })*
    };
}

from_module_error!(
    aberrasim_core::optics::OpticsError,
    aberrasim_core::wavefront::PsfError,
    aberrasim_core::imaging::ImageError,
    aberrasim_core::inn::InnError
);

pub type Result<T, E = CliError> = std::result::Result<T, E>;
