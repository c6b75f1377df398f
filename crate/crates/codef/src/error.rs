//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by configuration validation, file I/O and checkpoints.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("{path}: bad flow magic {found} (expected 202021.25)")]
    FloBadMagic { path: PathBuf, found: f32 },

    #[error("{path}: nonpositive flow dimensions {width}x{height}")]
    FloBadDims {
        path: PathBuf,
        width: i32,
        height: i32,
    },

    #[error("{path}: truncated flow payload (expected {expected} bytes, got {got})")]
    FloTruncated {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("missing flow for frame pair {from}->{to}")]
    MissingFlow { from: usize, to: usize },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("image error on {path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("invalid input: {0}")]
    Input(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
