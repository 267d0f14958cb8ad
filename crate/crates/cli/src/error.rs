use std::path::PathBuf;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const USAGE: i32 = 1;
    pub const PARSE: i32 = 2;
    pub const INFEASIBLE: i32 = 3;
    pub const NUMERICAL: i32 = 4;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Parse(String),
    #[error("line {line}: {field}: {message}")]
    Field {
        line: usize,
        field: String,
        message: String,
    },
    #[error("{stage}: {message}")]
    Infeasible {
        stage: &'static str,
        message: String,
    },
    #[error("{stage}: {message}")]
    Numerical {
        stage: &'static str,
        message: String,
    },
    #[error("verification failed: {0}")]
    Verification(String),
    #[error("cannot write {path}: {source}")]
    Write {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Write { .. } => exit::USAGE,
            CliError::Read { .. } | CliError::Parse(_) | CliError::Field { .. } => exit::PARSE,
            CliError::Infeasible { .. } => exit::INFEASIBLE,
            CliError::Numerical { .. } | CliError::Verification(_) => exit::NUMERICAL,
        }
    }

    pub(crate) fn numerical(stage: &'static str, e: impl std::fmt::Display) -> Self {
        CliError::Numerical {
            stage,
            message: e.to_string(),
        }
    }
}
