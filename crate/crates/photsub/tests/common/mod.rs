#![allow(dead_code)]

use std::path::PathBuf;

use photsub::ExperimentConfig;

pub fn config_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

pub fn paper() -> ExperimentConfig {
    ExperimentConfig::load(&config_path("paper.config")).unwrap()
}

/// Bundled config shrunk for fast tests: low cutoff, small grid, few frames.
pub fn small() -> ExperimentConfig {
    let mut cfg = paper();
    cfg.truncation.signal_n_max = 22;
    cfg.wigner.nx = 61;
    cfg.wigner.np = 61;
    cfg.mle.n_max = 8;
    cfg.mle.bootstrap_resamples = 0;
    for t in &mut cfg.taps {
        t.frames_per_phase = 400;
    }
    cfg
}
