//! Run reports and report comparison.

use photsub_core::wigner::NegativityReport;
use photsub_core::DensityMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    /// Source, loss and heralding only.
    Simulate,
    /// Also sample homodyne data and reconstruct it.
    Full,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub tool: String,
    pub version: String,
    pub config_hash: String,
    pub mode: Mode,
    pub seed: u64,
    pub fit: FitRecord,
    pub cases: Vec<CaseReport>,
    pub narrowing: Vec<NarrowingRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub r: f64,
    pub squeeze_phase_deg: f64,
    /// Efficiency that reproduces the measured squeezing pair.
    pub fitted_efficiency: f64,
    pub budget_efficiency: f64,
    /// `fitted / budget`; reported, not applied.
    pub extra_efficiency: f64,
    pub purity: f64,
    pub source_efficiency: f64,
    pub downstream_efficiency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateMetrics {
    pub w_origin: f64,
    pub w_min: f64,
    pub w_min_location: [f64; 2],
    pub subplanck_variance: f64,
    pub negative_regions: usize,
    pub grid_integral: f64,
    pub photon_dist: Vec<f64>,
    pub mean_photon_number: f64,
    pub purity: f64,
}

impl StateMetrics {
    pub fn new(rho: &DensityMatrix, neg: &NegativityReport) -> Self {
        let photon_dist = rho.populations();
        let mean_photon_number = photon_dist.iter().enumerate().map(|(n, p)| n as f64 * p).sum();
        Self {
            w_origin: neg.w_origin,
            w_min: neg.w_min,
            w_min_location: [neg.w_min_location.0, neg.w_min_location.1],
            subplanck_variance: neg.subplanck_variance,
            negative_regions: neg.negative_regions,
            grid_integral: neg.grid_integral,
            photon_dist,
            mean_photon_number,
            purity: rho.purity(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructedMetrics {
    pub metrics: StateMetrics,
    pub w_origin_err: Option<f64>,
    pub photon_dist_err: Option<Vec<f64>>,
    pub fidelity_to_simulated: f64,
    pub frames: usize,
    pub iterations_used: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub herald_n: usize,
    pub reflectance: f64,
    pub idler_efficiency: f64,
    pub probability: f64,
    /// Heralds per second at the repetition rate, duty ratio not applied.
    pub rate_hz: f64,
    pub rate_with_duty_hz: f64,
    pub idler_leakage: f64,
    pub simulated: StateMetrics,
    pub reconstructed: Option<ReconstructedMetrics>,
}

impl CaseReport {
    /// Reconstructed metrics when available, otherwise simulated.
    pub fn primary(&self) -> (&StateMetrics, &'static str) {
        match &self.reconstructed {
            Some(r) => (&r.metrics, "reconstructed"),
            None => (&self.simulated, "simulated"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NarrowingRecord {
    pub herald_n: usize,
    pub reference_herald_n: usize,
    /// `1 - sqrt(var / var_ref)` of the sub-Planck witness.
    pub simulated_width: f64,
    /// `1 - var / var_ref`.
    pub simulated_variance: f64,
    pub reconstructed_width: Option<f64>,
    pub reconstructed_variance: Option<f64>,
}

impl RunReport {
    pub fn case(&self, herald_n: usize) -> Option<&CaseReport> {
        self.cases.iter().find(|c| c.herald_n == herald_n)
    }

    pub fn narrowing_for(&self, herald_n: usize) -> Option<&NarrowingRecord> {
        self.narrowing.iter().find(|n| n.herald_n == herald_n)
    }

    /// Deterministic JSON text (the bytes written to `report.json`).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CaseDelta {
    pub herald_n: usize,
    pub source_a: String,
    pub source_b: String,
    pub w_origin: f64,
    pub w_min: f64,
    pub rate_hz: f64,
    pub narrowing_width: Option<f64>,
    /// Combined bootstrap error of `W(0,0)` when either side has one.
    pub w_origin_err: Option<f64>,
}

/// Per-case `b - a` deltas. Both reports must cover the same herald cases.
pub fn compare_reports(a: &RunReport, b: &RunReport) -> Result<Vec<CaseDelta>> {
    let mut ka: Vec<usize> = a.cases.iter().map(|c| c.herald_n).collect();
    let mut kb: Vec<usize> = b.cases.iter().map(|c| c.herald_n).collect();
    ka.sort_unstable();
    kb.sort_unstable();
    if ka != kb {
        return Err(RunError::Mismatch(format!("herald cases {ka:?} vs {kb:?}")));
    }
    let narrow = |r: &RunReport, n: usize| {
        r.narrowing_for(n).map(|x| x.reconstructed_width.unwrap_or(x.simulated_width))
    };
    let err = |c: &CaseReport| c.reconstructed.as_ref().and_then(|r| r.w_origin_err);
    Ok(a.cases
        .iter()
        .map(|ca| {
            let cb = b.case(ca.herald_n).expect("case sets match");
            let ((ma, sa), (mb, sb)) = (ca.primary(), cb.primary());
            let w_origin_err = match (err(ca), err(cb)) {
                (None, None) => None,
                (x, y) => Some((x.unwrap_or(0.0).powi(2) + y.unwrap_or(0.0).powi(2)).sqrt()),
            };
            CaseDelta {
                herald_n: ca.herald_n,
                source_a: sa.to_string(),
                source_b: sb.to_string(),
                w_origin: mb.w_origin - ma.w_origin,
                w_min: mb.w_min - ma.w_min,
                rate_hz: cb.rate_hz - ca.rate_hz,
                narrowing_width: match (narrow(a, ca.herald_n), narrow(b, ca.herald_n)) {
                    (Some(x), Some(y)) => Some(y - x),
                    _ => None,
                },
                w_origin_err,
            }
        })
        .collect())
}

/// Plain-text table of [`compare_reports`] output.
pub fn format_deltas(deltas: &[CaseDelta]) -> String {
    let mut out = String::from("herald  dW(0,0)      dw_min       drate/s      dnarrowing   err(W00)\n");
    for d in deltas {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:+.5}"));
        out += &format!(
            "{:>6}  {:+.5e}  {:+.5e}  {:+.4e}  {:>11}  {:>9}\n",
            d.herald_n,
            d.w_origin,
            d.w_min,
            d.rate_hz,
            opt(d.narrowing_width),
            d.w_origin_err.map_or("-".to_string(), |x| format!("{x:.5}"))
        );
    }
    out
}

/// Plain-text summary of a report.
pub fn format_report(r: &RunReport) -> String {
    let mut out = format!(
        "config {}  mode {:?}  seed {}\nfit: r = {:.4}, fitted efficiency {:.4}, budget {:.4}, extra {:.4}\n\n",
        &r.config_hash[..12],
        r.mode,
        r.seed,
        r.fit.r,
        r.fit.fitted_efficiency,
        r.fit.budget_efficiency,
        r.fit.extra_efficiency
    );
    out += "herald  prob        rate/s      W(0,0)      w_min       at (x, p)          regions  W(0,0) rec   F\n";
    for c in &r.cases {
        let s = &c.simulated;
        let (rec, fid) = match &c.reconstructed {
            Some(m) => (
                format!(
                    "{:+.4}{}",
                    m.metrics.w_origin,
                    m.w_origin_err.map_or(String::new(), |e| format!("±{e:.4}"))
                ),
                format!("{:.4}", m.fidelity_to_simulated),
            ),
            None => ("-".to_string(), "-".to_string()),
        };
        out += &format!(
            "{:>6}  {:.3e}  {:.3e}  {:+.5}  {:+.5}  ({:+.3}, {:+.3})  {:>7}  {:>12}  {}\n",
            c.herald_n, c.probability, c.rate_hz, s.w_origin, s.w_min, s.w_min_location[0], s.w_min_location[1], s.negative_regions, rec, fid
        );
    }
    for n in &r.narrowing {
        out += &format!(
            "narrowing {} vs {}: width {:.3}, variance {:.3}{}\n",
            n.herald_n,
            n.reference_herald_n,
            n.simulated_width,
            n.simulated_variance,
            n.reconstructed_width.map_or(String::new(), |w| format!(", reconstructed width {w:.3}"))
        );
    }
    out
}
