use std::fmt;

/// Command failure, split by the exit code it maps to.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad configuration, input data or arguments (exit 2).
    Validation(String),
    /// Integration or optimization failure (exit 3).
    Numerical(String),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &std::path::Path, err: std::io::Error) -> Self {
        CliError::Validation(format!("{}: {err}", path.display()))
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<mpemba_core::Error> for CliError {
    fn from(e: mpemba_core::Error) -> Self {
        if e.is_validation() {
            CliError::Validation(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}
