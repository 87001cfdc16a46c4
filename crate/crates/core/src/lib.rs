pub mod ablation;
pub mod config;
pub mod data;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod loss;
pub mod model;
pub mod rng;
pub mod selfcheck;
pub mod tensor;
pub mod train;

pub use error::{Error, Result};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "CYCLESPEC_THREADS";

/// Sizes the global worker pool from `CYCLESPEC_THREADS` when it is set.
pub fn configure_threads_from_env() -> Result<()> {
    let Ok(raw) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Config(format!("{THREADS_ENV}={raw} is not a positive integer")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))
}

/// Worker threads available to parallel sections.
pub fn parallelism() -> usize {
    rayon::current_num_threads()
}
