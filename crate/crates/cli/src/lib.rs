//! Library half of the `oevla` binary, so the argument handling can be
//! tested without spawning processes.

pub mod cli;
pub mod commands;
pub mod config;

use std::ffi::OsString;

use anyhow::Result;
use clap::Parser;

/// Parses `args` (including the program name), applies `--config`
/// defaults, and runs the subcommand.
pub fn run(args: Vec<OsString>) -> Result<()> {
    let args = config::apply(args)?;
    let cli = cli::Cli::try_parse_from(args).unwrap_or_else(|e| e.exit());
    commands::run(cli.command)
}
