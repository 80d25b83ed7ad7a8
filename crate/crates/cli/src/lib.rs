//! Command-line drivers for the layerpot numerical laboratory: measure
//! generation, operator norms, kernel comparisons, spherical decompositions,
//! the local criterion, and config-driven experiments that emit report
//! bundles (JSON summary, CSV tables, pass/fail digest).

pub mod commands;
pub mod error;
pub mod experiments;
pub mod io;
pub mod report;
pub mod seeds;

pub use error::{CliError, CliResult};
pub use experiments::{run_experiment, ExperimentConfig, EXPERIMENTS};
pub use report::{emit_plotdata, Check, ReportBundle, Selector, Table};
pub use seeds::SeedSplitter;

/// Environment variable capping the worker threads.
pub const THREADS_ENV: &str = "LAYERPOT_THREADS";

/// Configures the global thread pool from [`THREADS_ENV`]; unset or empty leaves rayon's default.
pub fn init_threads() -> CliResult<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    if raw.trim().is_empty() {
        return Ok(());
    }
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Config(format!("{THREADS_ENV} must be a positive integer, got {raw:?}")))?;
    // A pool that already exists (tests, repeated calls) is left as is.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}
