use std::fmt;
use std::process::ExitCode;

use mamsr::{CheckpointError, Error};

/// Failure classes with distinct exit codes.
#[derive(Debug)]
pub enum CliError {
    /// Invalid configuration or a checkpoint that does not fit it (exit 2).
    Config(String),
    /// Missing, unreadable or unsuitable input data (exit 3).
    Data(String),
    /// Anything else, e.g. I/O failures or diverged training (exit 1).
    Other(anyhow::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config(_) => ExitCode::from(2),
            CliError::Data(_) => ExitCode::from(3),
            CliError::Other(_) => ExitCode::from(1),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
            CliError::Other(e) => write!(f, "{e:#}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Checkpoint(c) => c.into(),
            Error::Config(_) | Error::Shape(_) => CliError::Config(e.to_string()),
            Error::Data(_) | Error::Image(_) => CliError::Data(e.to_string()),
            other => CliError::Other(other.into()),
        }
    }
}

impl From<CheckpointError> for CliError {
    fn from(e: CheckpointError) -> Self {
        match e {
            CheckpointError::Io(_) => CliError::Other(e.into()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Other(e.into())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Other(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn code(e: impl Into<CliError>) -> ExitCode {
        e.into().exit_code()
    }

    #[test]
    fn library_errors_map_to_exit_codes() {
        assert_eq!(code(Error::Config("x".into())), ExitCode::from(2));
        assert_eq!(code(Error::Shape("x".into())), ExitCode::from(2));
        assert_eq!(code(Error::Checkpoint(CheckpointError::BadMagic(*b"NOPE"))), ExitCode::from(2));
        assert_eq!(code(Error::Data("x".into())), ExitCode::from(3));
        assert_eq!(code(Error::Image(mamsr::ImageError::NotFound("a.png".into()))), ExitCode::from(3));
        assert_eq!(code(Error::NonFinite("x".into())), ExitCode::from(1));
        let io = || std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert_eq!(code(Error::Io(io())), ExitCode::from(1));
        assert_eq!(code(CheckpointError::Io(io())), ExitCode::from(1));
    }
}
