use std::fmt;
use std::path::Path;

use sentinet::Error;

pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_VALIDATION: i32 = 4;

/// A failed run, printed as a single `code: message` line.
#[derive(Debug)]
pub struct Failure {
    pub code: &'static str,
    pub exit: i32,
    pub message: String,
}

impl Failure {
    fn new(code: &'static str, exit: i32, message: impl Into<String>) -> Self {
        Self {
            code,
            exit,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> Self {
        Self::new("usage_error", EXIT_USAGE, message)
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new("config_error", EXIT_USAGE, message)
    }

    pub fn invalid_value(message: impl Into<String>) -> Self {
        Self::new("invalid_value", EXIT_VALIDATION, message)
    }

    pub fn validation(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(code, EXIT_VALIDATION, message)
    }

    pub fn io(path: &Path, err: &std::io::Error) -> Self {
        Self::io_message(path, err)
    }

    pub fn io_message(path: &Path, what: impl fmt::Display) -> Self {
        Self::new("io_error", EXIT_IO, format!("{}: {what}", path.display()))
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let flat: String = self
            .message
            .chars()
            .map(|c| if c == '\n' || c == '\r' { ' ' } else { c })
            .collect();
        write!(f, "{}: {}", self.code, flat.trim())
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let (code, exit) = match &e {
            Error::Io { path, source } => return Failure::io(path, source),
            Error::InvalidArgument(_) => ("invalid_argument", EXIT_VALIDATION),
            Error::PreconditionViolation(_) => ("precondition_violation", EXIT_VALIDATION),
            Error::InsufficientData { .. } => ("insufficient_data", EXIT_VALIDATION),
            Error::NotFound(_) => ("not_found", EXIT_VALIDATION),
            Error::IncompatibleCheckpoint { .. } => ("incompatible_checkpoint", EXIT_VALIDATION),
            Error::KindMismatch { .. } => ("kind_mismatch", EXIT_VALIDATION),
            Error::VocabularyMismatch { .. } => ("vocabulary_mismatch", EXIT_VALIDATION),
            Error::Checkpoint(_) => ("malformed_checkpoint", EXIT_VALIDATION),
            Error::Parse { .. } => ("parse_error", EXIT_VALIDATION),
            Error::InvalidState(_) => ("invalid_state", EXIT_RUNTIME),
            Error::NonFinite(_) => ("non_finite", EXIT_RUNTIME),
        };
        Self::new(code, exit, e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_line() {
        let f = Failure::usage("two\nlines");
        assert_eq!(f.to_string(), "usage_error: two lines");
    }

    #[test]
    fn core_errors_map_to_exit_codes() {
        let io = Error::Io {
            path: "/a/b".into(),
            source: std::io::Error::from(std::io::ErrorKind::NotFound),
        };
        let f = Failure::from(io);
        assert_eq!(f.exit, EXIT_IO);
        assert!(f.to_string().starts_with("io_error: /a/b"));
        assert_eq!(
            Failure::from(Error::NonFinite("x".into())).exit,
            EXIT_RUNTIME
        );
        assert_eq!(
            Failure::from(Error::KindMismatch {
                expected: "joint".into(),
                found: "baseline".into()
            })
            .exit,
            EXIT_VALIDATION
        );
    }
}
