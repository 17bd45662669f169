//! Experiment runner for the memory-based attentive fusion layer.
//!
//! [`args`] holds the command-line surface, [`config`] the JSON experiment
//! file, [`experiment`] one training run and [`commands`] the subcommands.

pub mod args;
pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;

pub use args::{run, Cli};
pub use error::{CliError, CliResult};
