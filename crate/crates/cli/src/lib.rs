//! Orchestration behind the `decvae` command-line tool.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;
pub mod plot;

pub use config::RunConfig;
pub use error::{CliError, CliResult};
