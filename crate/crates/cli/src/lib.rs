//! Library side of the command-line front end: configuration parsing, CSV
//! ingestion, report assembly and the subcommand implementations.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;
pub mod report;

pub use error::{CliError, Result};
