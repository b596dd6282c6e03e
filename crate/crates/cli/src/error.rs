use std::io;

use thiserror::Error;

/// Errors surfaced by the command-line front end. Each maps to a stable
/// process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Numeric(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },
}

impl CliError {
    pub const EXIT_OK: i32 = 0;
    pub const EXIT_USAGE: i32 = 1;
    pub const EXIT_PARSE: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => Self::EXIT_USAGE,
            CliError::Parse(_) | CliError::Io { .. } => Self::EXIT_PARSE,
            CliError::Numeric(_) => Self::EXIT_NUMERIC,
        }
    }

    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

impl From<rankscope::Error> for CliError {
    fn from(e: rankscope::Error) -> Self {
        match e {
            rankscope::Error::Input(_) => CliError::Parse(e.to_string()),
            rankscope::Error::Domain(_) | rankscope::Error::Numeric { .. } => CliError::Numeric(e.to_string()),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;
