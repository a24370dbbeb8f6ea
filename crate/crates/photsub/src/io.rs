//! File formats: quadrature datasets, Wigner grids and reconstructions.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! value reads back bit-exactly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use photsub_core::fock::CMatrix;
use photsub_core::Complex64;
use photsub_core::homodyne::{DatasetMeta, Frame, MeasurementPlan, QuadratureDataset, DATASET_CONVENTION};
use photsub_core::tomography::Reconstruction;
use photsub_core::wigner::{WignerGrid, CONVENTION};
use serde::{Deserialize, Serialize};

use crate::error::{Result, RunError};

pub const DATASET_FILE: &str = "dataset.csv";
pub const SHOT_FILE: &str = "shot.csv";
pub const SIDECAR_FILE: &str = "dataset.json";

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| RunError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| RunError::io(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| RunError::format(path, e))?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| RunError::format(path, e))
}

/// JSON sidecar describing a dataset directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSidecar {
    pub convention: String,
    /// Phases in radians, in index order.
    pub phases: Vec<f64>,
    pub frames_per_phase: Vec<usize>,
    pub shot_frames: usize,
    pub calibrated: bool,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub mode_function: Option<String>,
    #[serde(default)]
    pub plan: Option<PlanRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub phases: Vec<f64>,
    pub frames_per_phase: usize,
    pub shot_frames: usize,
    pub seed: u64,
    pub electronic_noise: f64,
    pub gain: f64,
}

impl From<&MeasurementPlan> for PlanRecord {
    fn from(p: &MeasurementPlan) -> Self {
        Self {
            phases: p.phases.clone(),
            frames_per_phase: p.frames_per_phase,
            shot_frames: p.shot_frames,
            seed: p.seed,
            electronic_noise: p.electronic_noise,
            gain: p.gain,
        }
    }
}

fn phase_deg(theta: f64) -> f64 {
    theta.to_degrees()
}

/// Writes `dataset.csv`, `shot.csv` and `dataset.json` into `dir`.
pub fn write_dataset(dir: &Path, ds: &QuadratureDataset, plan: Option<&MeasurementPlan>) -> Result<()> {
    let header = format!("# convention={DATASET_CONVENTION}\nphase_deg,value\n");
    let mut body = header.clone().into_bytes();
    for f in &ds.frames {
        writeln!(body, "{},{}", phase_deg(ds.phases[f.phase_index]), f.value).expect("in-memory write");
    }
    write_file(&dir.join(DATASET_FILE), &body)?;
    let mut shot = header.into_bytes();
    for v in &ds.shot_frames {
        writeln!(shot, "NaN,{v}").expect("in-memory write");
    }
    write_file(&dir.join(SHOT_FILE), &shot)?;
    let sidecar = DatasetSidecar {
        convention: ds.meta.convention.clone(),
        phases: ds.phases.clone(),
        frames_per_phase: ds.meta.frames_per_phase.clone(),
        shot_frames: ds.shot_frames.len(),
        calibrated: ds.meta.calibrated,
        seed: ds.meta.seed,
        mode_function: ds.meta.mode_function.clone(),
        plan: plan.map(PlanRecord::from),
    };
    write_json(&dir.join(SIDECAR_FILE), &sidecar)
}

/// Reads `(phase_deg, value)` rows after checking the convention line.
fn read_rows(path: &Path) -> Result<Vec<(f64, f64)>> {
    let text = fs::read_to_string(path).map_err(|e| RunError::io(path, e))?;
    let first = text.lines().next().unwrap_or_default();
    let expected = format!("# convention={DATASET_CONVENTION}");
    if first.trim() != expected {
        return Err(RunError::format(path, format!("first line must be `{expected}`")));
    }
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
    let headers = reader.headers().map_err(|e| RunError::format(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["phase_deg", "value"] {
        return Err(RunError::format(path, "expected columns phase_deg,value"));
    }
    reader
        .records()
        .enumerate()
        .map(|(i, rec)| {
            let rec = rec.map_err(|e| RunError::format(path, e))?;
            let field = |k: usize| -> Result<f64> {
                rec.get(k)
                    .unwrap_or_default()
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| RunError::format(path, format!("row {}: {e}", i + 1)))
            };
            Ok((field(0)?, field(1)?))
        })
        .collect()
}

/// Reads a dataset directory. Without a sidecar, phases are taken in order
/// of first appearance and the data are treated as uncalibrated.
pub fn read_dataset(dir: &Path) -> Result<QuadratureDataset> {
    let sidecar_path = dir.join(SIDECAR_FILE);
    let sidecar: Option<DatasetSidecar> = if sidecar_path.exists() { Some(read_json(&sidecar_path)?) } else { None };
    let data_path = dir.join(DATASET_FILE);
    let rows = read_rows(&data_path)?;
    let shot_path = dir.join(SHOT_FILE);
    let shot_frames = if shot_path.exists() {
        let rows = read_rows(&shot_path)?;
        if rows.iter().any(|(p, _)| !p.is_nan()) {
            return Err(RunError::format(&shot_path, "shot frames must have phase_deg=NaN"));
        }
        rows.into_iter().map(|(_, v)| v).collect()
    } else {
        Vec::new()
    };
    let mut phases: Vec<f64> = sidecar.as_ref().map(|s| s.phases.clone()).unwrap_or_default();
    let mut degs: Vec<f64> = phases.iter().map(|&t| phase_deg(t)).collect();
    let mut frames = Vec::with_capacity(rows.len());
    for (deg, value) in rows {
        let idx = match degs.iter().position(|&d| d == deg) {
            Some(i) => i,
            None if sidecar.is_none() && deg.is_finite() => {
                degs.push(deg);
                phases.push(deg.to_radians());
                degs.len() - 1
            }
            None => return Err(RunError::format(&data_path, format!("phase {deg} deg is not declared in the sidecar"))),
        };
        frames.push(Frame { phase_index: idx, value });
    }
    let calibrated = sidecar.as_ref().is_some_and(|s| s.calibrated);
    let mut ds = QuadratureDataset::new(phases, frames, shot_frames, calibrated).map_err(|e| RunError::format(&data_path, e))?;
    if let Some(s) = sidecar {
        if s.frames_per_phase != ds.meta.frames_per_phase {
            return Err(RunError::format(&sidecar_path, "frame counts do not match dataset.csv"));
        }
        ds.meta = DatasetMeta { convention: s.convention, seed: s.seed, mode_function: s.mode_function, ..ds.meta };
    }
    Ok(ds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AxisRecord {
    pub min: f64,
    pub max: f64,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WignerHeader {
    pub convention: String,
    pub x_axis: AxisRecord,
    pub p_axis: AxisRecord,
    pub max_imag: f64,
    pub layout: String,
}

fn axis(a: &[f64]) -> AxisRecord {
    AxisRecord { min: a[0], max: a[a.len() - 1], n: a.len() }
}

/// Writes `<stem>.csv` with columns `x,p,W` and `<stem>.json` header.
pub fn write_wigner(dir: &Path, stem: &str, grid: &WignerGrid) -> Result<()> {
    let mut body = b"x,p,W\n".to_vec();
    for (ix, x) in grid.x_axis.iter().enumerate() {
        for (ip, p) in grid.p_axis.iter().enumerate() {
            writeln!(body, "{x},{p},{}", grid.at(ix, ip)).expect("in-memory write");
        }
    }
    write_file(&dir.join(format!("{stem}.csv")), &body)?;
    let header = WignerHeader {
        convention: CONVENTION.to_string(),
        x_axis: axis(&grid.x_axis),
        p_axis: axis(&grid.p_axis),
        max_imag: grid.max_imag,
        layout: "x-major rows of (x, p, W)".to_string(),
    };
    write_json(&dir.join(format!("{stem}.json")), &header)
}

pub fn read_wigner(dir: &Path, stem: &str) -> Result<WignerGrid> {
    let header: WignerHeader = read_json(&dir.join(format!("{stem}.json")))?;
    let path: PathBuf = dir.join(format!("{stem}.csv"));
    let mut reader = csv::Reader::from_path(&path).map_err(|e| RunError::format(&path, e))?;
    let mut xs = Vec::new();
    let mut ps = Vec::new();
    let mut values = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| RunError::format(&path, e))?;
        let f = |k: usize| rec.get(k).unwrap_or_default().parse::<f64>().map_err(|e| RunError::format(&path, e));
        let (x, p, w) = (f(0)?, f(1)?, f(2)?);
        if values.len() % header.p_axis.n == 0 {
            xs.push(x);
        }
        if xs.len() == 1 {
            ps.push(p);
        }
        values.push(w);
    }
    if xs.len() != header.x_axis.n || ps.len() != header.p_axis.n {
        return Err(RunError::format(&path, "grid size does not match its header"));
    }
    Ok(WignerGrid { x_axis: xs, p_axis: ps, values, max_imag: header.max_imag })
}

/// JSON form of a reconstruction. Matrices are row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionRecord {
    pub n_max: usize,
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
    pub photon_dist: Vec<f64>,
    pub photon_dist_err: Option<Vec<f64>>,
    pub wigner_origin: f64,
    /// Bootstrap standard deviation of `W(0,0)`.
    pub wigner_err_origin: Option<f64>,
    pub bootstrap_skipped: bool,
    pub iterations_used: usize,
    pub converged: bool,
    pub floor_hits: usize,
    pub diluted_steps: usize,
    pub log_likelihood_trace: Vec<f64>,
}

impl ReconstructionRecord {
    pub fn new(rec: &Reconstruction) -> Self {
        let m: &CMatrix = rec.rho.elements();
        let rows = |f: fn(&Complex64) -> f64| -> Vec<Vec<f64>> {
            (0..m.nrows()).map(|i| (0..m.ncols()).map(|j| f(&m[(i, j)])).collect()).collect()
        };
        Self {
            n_max: rec.rho.dim().n_max(),
            rho_re: rows(|z| z.re),
            rho_im: rows(|z| z.im),
            photon_dist: rec.photon_dist.clone(),
            photon_dist_err: rec.photon_dist_err.clone(),
            wigner_origin: photsub_core::wigner::parity_origin(&rec.rho),
            wigner_err_origin: rec.wigner_err_origin,
            bootstrap_skipped: rec.bootstrap_skipped,
            iterations_used: rec.iterations_used,
            converged: rec.converged,
            floor_hits: rec.floor_hits,
            diluted_steps: rec.diluted_steps,
            log_likelihood_trace: rec.log_likelihood_trace.clone(),
        }
    }

    pub fn density_matrix(&self) -> photsub_core::Result<photsub_core::DensityMatrix> {
        let n = self.n_max + 1;
        let m = CMatrix::from_fn(n, n, |i, j| Complex64::new(self.rho_re[i][j], self.rho_im[i][j]));
        photsub_core::DensityMatrix::new(photsub_core::FockDim::new(self.n_max)?, m)
    }
}
