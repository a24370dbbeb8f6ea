//! Configuration-driven runner for photon-subtracted squeezed-light
//! simulations: file formats, parallel pipeline and run reports.

pub mod config;
pub mod error;
pub mod io;
pub mod pipeline;
pub mod report;

pub use config::ExperimentConfig;
pub use error::{Result, RunError};
pub use pipeline::{run_pipeline, RunOptions, RunOutput};
pub use report::{compare_reports, Mode, RunReport};

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "PHOTSUB_THREADS";

/// Sizes the global thread pool from [`THREADS_ENV`], if set.
pub fn init_threads() -> std::result::Result<(), String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => {
            let n: usize = v.trim().parse().map_err(|_| format!("{THREADS_ENV}={v} is not a thread count"))?;
            rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
        }
        Err(_) => Ok(()),
    }
}
