use std::fmt::Display;
use std::path::Path;

use cuboidtrack::Error;

pub const INTERNAL: u8 = 1;
pub const CONFIG: u8 = 2;
pub const IO: u8 = 3;
pub const MISALIGNED: u8 = 4;

/// A failed command: process exit code plus a one-line message.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn config(message: impl Into<String>) -> Self {
        Self { code: CONFIG, message: message.into() }
    }

    pub fn io(path: &Path, err: impl Display) -> Self {
        Self { code: IO, message: format!("{}: {err}", path.display()) }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self { code: INTERNAL, message: message.into() }
    }

    /// A core error raised while handling `path`.
    pub fn at(path: &Path, err: Error) -> Self {
        let f = Self::from(err);
        Self { message: format!("{}: {}", path.display(), f.message), ..f }
    }
}

impl From<Error> for Failure {
    fn from(err: Error) -> Self {
        let code = match err {
            Error::InvalidConfig(_) => CONFIG,
            Error::Io(_) | Error::Malformed { .. } | Error::EmptyInput => IO,
            Error::FrameMismatch(_) => MISALIGNED,
            _ => INTERNAL,
        };
        Self { code, message: err.to_string() }
    }
}
