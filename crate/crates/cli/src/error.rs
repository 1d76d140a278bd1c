use std::path::PathBuf;

use thiserror::Error;

/// Harness-level errors, classified so the process can exit with the
/// documented codes: 2 for configuration problems, 3 for data problems,
/// 4 for numeric failures.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error in {path} at {location}: {message}")]
    Parse {
        path: PathBuf,
        /// "line N" or "byte N" position inside the file.
        location: String,
        message: String,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] gzsl_core::Error),

    #[error("numeric failure: {0}")]
    Numeric(String),
}

impl CliError {
    pub fn parse_line(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            location: format!("line {line}"),
            message: message.into(),
        }
    }

    pub fn parse_byte(path: impl Into<PathBuf>, byte: usize, message: impl Into<String>) -> Self {
        CliError::Parse {
            path: path.into(),
            location: format!("byte {byte}"),
            message: message.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error.
    pub fn exit_code(&self) -> i32 {
        use gzsl_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Parse { .. } | CliError::Io { .. } => 3,
            CliError::Numeric(_) => 4,
            CliError::Core(core) => match core {
                E::InvalidArgument(_) | E::EmptyGrid | E::KTooLarge { .. } => 2,
                E::Numeric(_)
                | E::DegenerateReference
                | E::DegenerateCurve(_)
                | E::ZeroVectorEmbedding(_) => 4,
                _ => 3,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_documented_classification() {
        use gzsl_core::Error as E;
        assert_eq!(CliError::Config("x".into()).exit_code(), 2);
        assert_eq!(CliError::parse_line("f.csv", 3, "bad").exit_code(), 3);
        assert_eq!(CliError::Core(E::UnknownLabel(9)).exit_code(), 3);
        assert_eq!(CliError::Core(E::EmptyGrid).exit_code(), 2);
        assert_eq!(CliError::Core(E::DegenerateReference).exit_code(), 4);
        assert_eq!(CliError::Numeric("nan".into()).exit_code(), 4);
    }
}
