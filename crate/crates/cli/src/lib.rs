//! Configuration loading and subcommands behind the `radinv` binary.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Report};
pub use config::{parse_config, parse_config_str, ExperimentConfig};
