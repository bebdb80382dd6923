use std::path::PathBuf;

use crate::config::Issue;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed JSON or wrong value types.
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    /// Well-formed but semantically invalid config.
    Invalid(Vec<Issue>),
    /// An algorithm rejected the (valid) config.
    Semantic(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    /// At least one oracle comparison exceeded its tolerance.
    OracleMismatch(usize),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Semantic(_) => 1,
            CliError::Parse { .. } => 2,
            CliError::Io { .. } => 3,
            CliError::OracleMismatch(_) => 4,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            CliError::Invalid(issues) => {
                write!(f, "invalid config ({} issues)", issues.len())?;
                for i in issues {
                    write!(f, "\n{i}")?;
                }
                Ok(())
            }
            CliError::Semantic(m) => write!(f, "{m}"),
            CliError::Io { path, source } => write!(f, "{}: {source}", path.display()),
            CliError::OracleMismatch(n) => write!(f, "{n} oracle comparisons exceeded their tolerance"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<fscap_core::Error> for CliError {
    fn from(e: fscap_core::Error) -> Self {
        CliError::Semantic(e.to_string())
    }
}
