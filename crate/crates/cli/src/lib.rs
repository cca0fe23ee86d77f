//! Command implementations behind the `procmatch` binary.
//!
//! Every command first prints a `# config` line holding its resolved
//! arguments as JSON, seeds included, so any run can be repeated from its
//! own output.

pub mod args;
pub mod cohort;
pub mod commands;
pub mod stats;

use std::io::Write;

use anyhow::Result;

pub use args::{Cli, Command};

pub fn config_echo(command: &Command) -> Result<String> {
    Ok(format!("# config {}", serde_json::to_string(command)?))
}

pub fn run(command: &Command, out: &mut dyn Write) -> Result<()> {
    writeln!(out, "{}", config_echo(command)?)?;
    match command {
        Command::Simulate(a) => commands::simulate(a, out),
        Command::Train(a) => commands::train_model(a, out),
        Command::Evaluate(a) => commands::evaluate(a, out).map(drop),
        Command::Replay(a) => commands::replay(a, out).map(drop),
        Command::Sweep(a) => commands::sweep(a, out).map(drop),
        Command::Match(a) => commands::run_match(a, out).map(drop),
        Command::Serve(a) => commands::serve(a, out),
    }
}
