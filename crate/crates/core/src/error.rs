use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Checkpoint(#[from] CheckpointError),

    #[error(transparent)]
    Image(#[from] ImageError),

    #[error(transparent)]
    Io(#[from] io::Error),
}

/// Failures while reading or writing a checkpoint file.
#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("bad magic bytes {0:?}, expected \"MAMN\"")]
    BadMagic([u8; 4]),

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error("payload length mismatch: manifest describes {expected} bytes, found {actual}")]
    LengthMismatch { expected: u64, actual: u64 },

    #[error("tensor {name}: shape {found:?} does not match configuration ({expected:?})")]
    ShapeMismatch { name: String, expected: Vec<usize>, found: Vec<usize> },

    #[error("malformed manifest: {0}")]
    Manifest(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl CheckpointError {
    /// Stable numeric code for each failure class.
    pub fn code(&self) -> u8 {
        match self {
            CheckpointError::BadMagic(_) => 1,
            CheckpointError::UnsupportedVersion(_) => 2,
            CheckpointError::LengthMismatch { .. } => 3,
            CheckpointError::ShapeMismatch { .. } => 4,
            CheckpointError::Manifest(_) => 5,
            CheckpointError::Io(_) => 6,
        }
    }
}

#[derive(Debug, Error)]
pub enum ImageError {
    #[error("image file not found: {0}")]
    NotFound(PathBuf),

    #[error("malformed PNG {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },

    #[error("unsupported color type {color} in {path}")]
    UnsupportedColor { path: PathBuf, color: String },

    #[error("failed to write {path}: {reason}")]
    Write { path: PathBuf, reason: String },
}
