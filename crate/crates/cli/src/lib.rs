//! Command-line front end: configuration files, experiment runs and their
//! CSV and manifest outputs.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::RunConfig;
pub use error::CliError;
pub use run::{run_experiment, Subcommand};
