//! Configuration, execution and artifact writing for the `stiefel-priors` command-line tool.

pub mod commands;
pub mod config;
pub mod error;

pub use commands::{execute, run_command, Artifacts};
pub use config::{parse_config, parse_override, Command, RunConfig};
pub use error::CliError;

/// Sizes the global thread pool from `STIEFEL_THREADS` when it is set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("STIEFEL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Threads(format!("expected a positive integer, got {v:?}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Threads(e.to_string()))
}
