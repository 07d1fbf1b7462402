use std::fmt;

use fairpost_core::Error as CoreError;

/// A failed command, classified by exit code.
#[derive(Debug)]
pub enum CliError {
    /// Unreadable or invalid input or configuration (exit 1).
    Input(String),
    /// The run finished but a reported guarantee was missed (exit 2).
    Guarantee(String),
    /// The work cap was exceeded (exit 3).
    Budget(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input(_) => 1,
            CliError::Guarantee(_) => 2,
            CliError::Budget(_) => 3,
        }
    }

    pub fn input(msg: impl fmt::Display) -> Self {
        CliError::Input(msg.to_string())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "input error: {m}"),
            CliError::Guarantee(m) => write!(f, "guarantee missed: {m}"),
            CliError::Budget(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::BudgetExceeded { .. } => CliError::Budget(e.to_string()),
            other => CliError::Input(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
