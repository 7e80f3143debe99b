//! The five subcommands: train, account, calibrate, verify, bench.

pub mod account;
pub mod bench;
pub mod calibrate;
pub mod train;
pub mod verify;

use clap::ValueEnum;

/// Training method selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    /// Noisy projected SGD with the Langevin privacy bound.
    Sgld,
    /// Per-example clipping baseline with per-step composition accounting.
    SgdDp,
    /// Plain SGD, no privacy.
    Sgd,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Sgld => "dp-sgld",
            Method::SgdDp => "dp-sgd",
            Method::Sgd => "no-dp",
        }
    }
}
