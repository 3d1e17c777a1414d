use std::fmt;

use serde::Serialize;

/// A failure with a stable machine-readable code and a process exit status.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub code: &'static str,
    pub message: String,
    #[serde(skip)]
    exit: i32,
}

impl CliError {
    pub fn config(message: impl Into<String>) -> Self {
        CliError {
            code: "E_CONFIG",
            message: message.into(),
            exit: 2,
        }
    }

    pub fn check(message: impl Into<String>) -> Self {
        CliError {
            code: "E_CHECK",
            message: message.into(),
            exit: 3,
        }
    }

    pub fn io(message: impl Into<String>) -> Self {
        CliError {
            code: "E_IO",
            message: message.into(),
            exit: 1,
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.exit
    }

    /// One JSON line for standard error.
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).unwrap_or_else(|_| format!("{{\"code\":\"{}\"}}", self.code))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

impl std::error::Error for CliError {}

impl From<hypervis_core::Error> for CliError {
    fn from(e: hypervis_core::Error) -> Self {
        use hypervis_core::Error as E;
        let (code, exit) = match e {
            E::Domain(_) | E::Model(_) => ("E_CONFIG", 2),
            E::WindowTooSmall { .. } => ("E_WINDOW", 1),
            E::BudgetExceeded { .. } => ("E_BUDGET", 1),
            E::Fit(_) => ("E_FIT", 1),
        };
        CliError {
            code,
            message: e.to_string(),
            exit,
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::io(e.to_string())
    }
}
