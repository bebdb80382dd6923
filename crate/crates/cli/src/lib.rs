//! Config-driven experiments over the `fscap-core` algorithms: capacity
//! sweeps, single-letter bounds, exponents and oracle cross-checks, written
//! as CSV and JSON.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

pub use commands::Outcome;
pub use config::{ExperimentConfig, Issue};
pub use error::CliError;
