//! Command-line harness: subcommands, experiment suites and report output.

pub mod commands;
pub mod error;
pub mod experiment;
pub mod report;

pub use error::{CliError, Result};
