//! Command-line front end for the `sorsvd` library.

pub mod args;
pub mod commands;
pub mod error;
pub mod frames;
pub mod report;

use std::io::Write;

pub use args::Cli;
pub use error::{CliError, Result};

/// Caps the rayon pool from `SORSVD_THREADS` when it holds a positive integer.
pub fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("SORSVD_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Usage(format!("SORSVD_THREADS must be a positive integer, got {raw:?}")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    configure_threads()?;
    commands::run(cli.command, out)
}
