//! Command-line front end: reads spectra and configuration, runs the
//! estimation stages and writes JSON/CSV artifacts plus a run report.

pub mod args;
pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod logging;
pub mod report;

pub use args::{Cli, Command};
pub use error::{exit, CliError, CliResult};

/// Runs a parsed command line, returning the report path.
pub fn run(cli: Cli) -> CliResult<std::path::PathBuf> {
    commands::execute(cli.command)
}
