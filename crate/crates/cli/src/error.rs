//! CLI error type with the stable exit-code contract:
//! 0 success, 1 verification failure, 2 configuration error.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            _ => 1,
        }
    }
}

impl From<sgld_core::Error> for CliError {
    fn from(err: sgld_core::Error) -> Self {
        use sgld_core::Error as E;
        match err {
            E::Config(m) => CliError::Config(m),
            E::InvalidInput(m) => CliError::Config(m),
            E::InfeasibleCalibration(m) => CliError::Config(m),
            E::ScheduleExhausted { .. } => CliError::Config(err.to_string()),
            E::Verification(m) => CliError::Verification(m),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(err: std::io::Error) -> Self {
        CliError::Runtime(format!("io error: {err}"))
    }
}

impl From<serde_json::Error> for CliError {
    fn from(err: serde_json::Error) -> Self {
        CliError::Config(format!("json error: {err}"))
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
