//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by this crate.
///
/// `Validation`, `Parse` and `SchemaVersion` indicate bad inputs (malformed
/// files, out-of-range parameters, inconsistent artifacts); the rest are
/// runtime failures such as I/O problems.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{message}")]
    Validation { message: String },

    #[error("failed to parse {path}: {source}")]
    Parse {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("unsupported schema version {found} in {path} (expected {expected})")]
    SchemaVersion {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::error::ImageError,
    },
}

impl Error {
    pub fn validation(message: impl Into<String>) -> Self {
        Error::Validation {
            message: message.into(),
        }
    }

    /// True for errors caused by invalid inputs rather than runtime failures.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Validation { .. } | Error::Parse { .. } | Error::SchemaVersion { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
