//! Experiment configuration (TOML).

use std::path::Path;

use photsub_core::fock::FockDim;
use photsub_core::homodyne::MeasurementPlan;
use photsub_core::state_prep::{LossBudget, MeasuredSqueezing};
use photsub_core::subtraction::TapConfig;
use photsub_core::tomography::{Binning, MleConfig};
use photsub_core::wigner::GridSpec;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, RunError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Free text; excluded from the config hash.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub seed: u64,
    pub rep_rate_hz: f64,
    /// Measurement duty ratio. Reported rates exclude it; it is applied only
    /// to the separate `rate_with_duty_hz` column.
    pub duty: f64,
    pub squeezing: SqueezingConfig,
    pub loss_budget: LossBudgetConfig,
    #[serde(default)]
    pub truncation: TruncationConfig,
    pub taps: Vec<TapEntry>,
    pub plan: PlanConfig,
    #[serde(default)]
    pub mle: MleSettings,
    #[serde(default)]
    pub wigner: GridConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SqueezingConfig {
    pub squeezing_db: f64,
    pub antisqueezing_db: f64,
    /// Squeezing angle in degrees: 0 squeezes x, 180 squeezes p.
    #[serde(default)]
    pub phase_deg: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossBudgetConfig {
    pub opa: f64,
    pub hd_photodiodes: f64,
    pub spatial_mode: f64,
    pub temporal_mode: f64,
    pub propagation: f64,
    pub circuit_noise: f64,
}

impl LossBudgetConfig {
    pub fn to_budget(&self) -> LossBudget {
        LossBudget {
            opa: self.opa,
            hd_photodiodes: self.hd_photodiodes,
            spatial_mode: self.spatial_mode,
            temporal_mode: self.temporal_mode,
            propagation: self.propagation,
            circuit_noise: self.circuit_noise,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruncationConfig {
    pub signal_n_max: usize,
    /// Defaults to `herald_n + 6` per case.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub idler_n_max: Option<usize>,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self { signal_n_max: 40, idler_n_max: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TapEntry {
    pub herald_n: usize,
    pub reflectance: f64,
    pub idler_efficiency: f64,
    pub frames_per_phase: usize,
    #[serde(default)]
    pub dark_count_mean: f64,
}

impl TapEntry {
    pub fn to_tap(&self) -> std::result::Result<TapConfig, photsub_core::Error> {
        let mut tap = TapConfig::new(self.reflectance, self.herald_n, self.idler_efficiency)?;
        tap.dark_count_mean = self.dark_count_mean;
        tap.validate()?;
        Ok(tap)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanConfig {
    pub phases_deg: Vec<f64>,
    /// Vacuum reference frames per case; `0` means seven times the case's
    /// per-phase frame count.
    #[serde(default)]
    pub shot_frames: usize,
    /// Additive detector noise variance in shot-noise units.
    #[serde(default)]
    pub electronic_noise: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MleSettings {
    pub n_max: usize,
    pub max_iters: usize,
    pub ll_tolerance: f64,
    /// Bins per phase; `0` selects the unbinned likelihood.
    pub bins: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dilution: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detector_efficiency: Option<f64>,
    /// Fit only real density matrices (mirror-symmetric phase coverage).
    #[serde(default)]
    pub assume_real: bool,
    #[serde(default)]
    pub bootstrap_resamples: usize,
    #[serde(default = "default_bootstrap_iters")]
    pub bootstrap_max_iters: usize,
}

fn default_bootstrap_iters() -> usize {
    MleConfig::default().bootstrap_max_iters
}

impl Default for MleSettings {
    fn default() -> Self {
        let d = MleConfig::default();
        Self {
            n_max: d.dim.n_max(),
            max_iters: d.max_iters,
            ll_tolerance: d.ll_tolerance,
            bins: 256,
            dilution: None,
            detector_efficiency: None,
            assume_real: false,
            bootstrap_resamples: 0,
            bootstrap_max_iters: d.bootstrap_max_iters,
        }
    }
}

impl MleSettings {
    pub fn to_mle(&self, bootstrap_seed: u64) -> Result<MleConfig> {
        let cfg = MleConfig {
            dim: FockDim::new(self.n_max).map_err(|e| RunError::config("mle.n_max", e))?,
            max_iters: self.max_iters,
            ll_tolerance: self.ll_tolerance,
            binning: if self.bins == 0 { Binning::Unbinned } else { Binning::Bins(self.bins) },
            dilution: self.dilution,
            detector_efficiency: self.detector_efficiency,
            assume_real: self.assume_real,
            bootstrap_resamples: self.bootstrap_resamples,
            bootstrap_seed,
            bootstrap_max_iters: self.bootstrap_max_iters,
        };
        cfg.validate().map_err(|e| RunError::config("mle", e))?;
        if self.bootstrap_resamples == 1 {
            return Err(RunError::config("mle.bootstrap_resamples", "must be 0 (off) or at least 2"));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridConfig {
    fn default() -> Self {
        let g = GridSpec::default();
        Self { x_min: g.x_min, x_max: g.x_max, nx: g.nx, p_min: g.p_min, p_max: g.p_max, np: g.np }
    }
}

impl GridConfig {
    pub fn to_spec(&self) -> GridSpec {
        GridSpec { x_min: self.x_min, x_max: self.x_max, nx: self.nx, p_min: self.p_min, p_max: self.p_max, np: self.np }
    }
}

fn check(ok: bool, field: &str, message: &str) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(RunError::config(field, message))
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| RunError::config("<toml>", e.message()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
        toml::from_str(&text).map_err(|e| RunError::format(path, e))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Field-level validation of every component.
    pub fn validate(&self) -> Result<()> {
        check(self.rep_rate_hz > 0.0 && self.rep_rate_hz.is_finite(), "rep_rate_hz", "must be positive")?;
        check(self.duty > 0.0 && self.duty <= 1.0, "duty", "must be in (0, 1]")?;
        MeasuredSqueezing::new(self.squeezing.squeezing_db, self.squeezing.antisqueezing_db)
            .map_err(|e| RunError::config("squeezing", e))?;
        check(self.squeezing.phase_deg.is_finite(), "squeezing.phase_deg", "must be finite")?;
        self.loss_budget.to_budget().validate().map_err(|e| RunError::config("loss_budget", e))?;
        FockDim::new(self.truncation.signal_n_max).map_err(|e| RunError::config("truncation.signal_n_max", e))?;
        if let Some(n) = self.truncation.idler_n_max {
            FockDim::new(n).map_err(|e| RunError::config("truncation.idler_n_max", e))?;
        }
        check(!self.taps.is_empty(), "taps", "at least one herald case is required")?;
        for (i, t) in self.taps.iter().enumerate() {
            t.to_tap().map_err(|e| RunError::config(format!("taps[{i}]"), e))?;
            check(t.frames_per_phase >= 1, &format!("taps[{i}].frames_per_phase"), "must be at least 1")?;
            check(
                t.herald_n <= self.truncation.signal_n_max,
                &format!("taps[{i}].herald_n"),
                "exceeds the signal cutoff",
            )?;
            if self.taps[..i].iter().any(|o| o.herald_n == t.herald_n) {
                return Err(RunError::config(format!("taps[{i}].herald_n"), "duplicate herald case"));
            }
        }
        let phases: Vec<f64> = self.plan.phases_deg.iter().map(|d| d.to_radians()).collect();
        MeasurementPlan { phases, frames_per_phase: 1, shot_frames: 0, seed: 0, electronic_noise: self.plan.electronic_noise, gain: 1.0 }
            .validate()
            .map_err(|e| RunError::config("plan", e))?;
        self.mle.to_mle(0)?;
        let g = &self.wigner;
        check(g.nx >= 3 && g.np >= 3, "wigner", "grid needs at least 3 points per axis")?;
        check(g.x_min < g.x_max && g.p_min < g.p_max, "wigner", "axis bounds are reversed")?;
        Ok(())
    }

    /// SHA-256 over the canonical JSON form of everything but `notes`.
    pub fn hash(&self) -> String {
        let canonical = ExperimentConfig { notes: String::new(), ..self.clone() };
        let json = serde_json::to_vec(&canonical).expect("config serializes");
        hex::encode(Sha256::digest(&json))
    }

    pub fn tap(&self, herald_n: usize) -> Option<(usize, &TapEntry)> {
        self.taps.iter().enumerate().find(|(_, t)| t.herald_n == herald_n)
    }

    /// Measurement plan of tap `index`. Each case draws from its own seed so
    /// results do not depend on which other cases run.
    pub fn plan_for(&self, index: usize) -> Result<MeasurementPlan> {
        let t = &self.taps[index];
        let shot = if self.plan.shot_frames == 0 { 7 * t.frames_per_phase } else { self.plan.shot_frames };
        let mut plan = MeasurementPlan::new(
            self.plan.phases_deg.iter().map(|d| d.to_radians()).collect(),
            t.frames_per_phase,
            shot,
            case_seed(self.seed, index, 0),
        )
        .map_err(|e| RunError::config("plan", e))?;
        plan.electronic_noise = self.plan.electronic_noise;
        Ok(plan)
    }

    pub fn mle_for(&self, index: usize) -> Result<MleConfig> {
        self.mle.to_mle(case_seed(self.seed, index, 1))
    }
}

/// Distinct seed per (base seed, case, purpose).
pub fn case_seed(seed: u64, case: usize, purpose: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ ((case as u64 + 1) << 8 | purpose).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
