//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the training, accounting and verification routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("schedule index {index} out of range for explicit schedule of length {len}")]
    ScheduleExhausted { index: usize, len: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("iterate diverged at iteration {iteration} (pre-projection norm {norm:.3e})")]
    Divergence { iteration: usize, norm: f64 },

    #[error("infeasible calibration: {0}")]
    InfeasibleCalibration(String),

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
