//! Simulate -> sample -> reconstruct -> report.

use std::io::Write;
use std::path::{Path, PathBuf};

use photsub_core::fock::apply_channel;
use photsub_core::homodyne::{assemble_dataset, normalize_dataset, sample_phase, sample_shot_frames, QuadratureDataset};
use photsub_core::state_prep::{fit_initial_squeezing, loss_channel, MeasuredSqueezing, SqueezeFit};
use photsub_core::subtraction::{herald_with, HeraldOptions, HeraldResult, SourceModel};
use photsub_core::tomography::{aggregate_bootstrap, bootstrap_replicate, mle_reconstruct, Cells, MleConfig, Reconstruction};
use photsub_core::wigner::{narrowing, negativity_report, variance_narrowing, wigner_eval, NegativityReport, WignerGrid};
use photsub_core::{DensityMatrix, FockDim};
use rayon::prelude::*;

use crate::config::ExperimentConfig;
use crate::error::{Result, RunError};
use crate::io::{write_dataset, write_json, write_wigner, ReconstructionRecord};
use crate::report::{CaseReport, FitRecord, Mode, NarrowingRecord, ReconstructedMetrics, RunReport, StateMetrics};

/// Fitted source parameters shared by all cases.
#[derive(Clone, Debug)]
pub struct Source {
    pub fit: SqueezeFit,
    pub model: SourceModel,
    pub downstream_efficiency: f64,
    pub dim: FockDim,
}

pub fn fit_source(cfg: &ExperimentConfig) -> Result<Source> {
    let meas = MeasuredSqueezing::new(cfg.squeezing.squeezing_db, cfg.squeezing.antisqueezing_db)
        .map_err(|e| RunError::core("squeezing", e))?;
    let budget = cfg.loss_budget.to_budget();
    let fit = fit_initial_squeezing(&meas, &budget).map_err(|e| RunError::core("squeezing", e))?;
    let squeeze = fit.squeeze(cfg.squeezing.phase_deg.to_radians()).map_err(|e| RunError::core("squeezing", e))?;
    let dim = FockDim::new(cfg.truncation.signal_n_max).map_err(|e| RunError::core("truncation.signal_n_max", e))?;
    Ok(Source {
        fit,
        model: SourceModel { squeeze, source_efficiency: budget.source_efficiency() },
        downstream_efficiency: budget.downstream_efficiency(),
        dim,
    })
}

/// Simulated state of one herald case and its Wigner analysis.
#[derive(Clone, Debug)]
pub struct SimulatedCase {
    pub index: usize,
    pub herald_n: usize,
    pub herald: HeraldResult,
    /// State at the homodyne detector.
    pub state: DensityMatrix,
    pub grid: WignerGrid,
    pub negativity: NegativityReport,
}

pub fn simulate_case(cfg: &ExperimentConfig, source: &Source, index: usize) -> Result<SimulatedCase> {
    let entry = &cfg.taps[index];
    let ctx = format!("herald case {}", entry.herald_n);
    let tap = entry.to_tap().map_err(|e| RunError::core(format!("taps[{index}]"), e))?;
    let input = source.model.state(source.dim).map_err(|e| RunError::core(&ctx, e))?;
    let opts = HeraldOptions { idler_cutoff: cfg.truncation.idler_n_max, ..HeraldOptions::default() };
    let herald = herald_with(&input, &tap, cfg.rep_rate_hz, 1.0, &opts).map_err(|e| RunError::core(&ctx, e))?;
    let loss = loss_channel(source.downstream_efficiency, source.dim).map_err(|e| RunError::core(&ctx, e))?;
    let state = apply_channel(&herald.state, &loss).map_err(|e| RunError::core(&ctx, e))?;
    let spec = cfg.wigner.to_spec();
    let grid = wigner_eval(&state, &spec.x_axis(), &spec.p_axis());
    let negativity = negativity_report(&grid, &state).map_err(|e| RunError::core(&ctx, e))?;
    Ok(SimulatedCase { index, herald_n: entry.herald_n, herald, state, grid, negativity })
}

/// Sampled data and reconstruction of one case.
#[derive(Clone, Debug)]
pub struct ReconstructedCase {
    pub dataset: QuadratureDataset,
    pub reconstruction: Reconstruction,
    pub grid: WignerGrid,
    pub negativity: NegativityReport,
    pub fidelity: f64,
}

/// Draws the case's dataset with per-phase streams, in parallel.
pub fn sample_case(cfg: &ExperimentConfig, sim: &SimulatedCase) -> Result<QuadratureDataset> {
    let plan = cfg.plan_for(sim.index)?;
    let ctx = format!("sampling herald case {}", sim.herald_n);
    let blocks = (0..plan.phases.len())
        .into_par_iter()
        .map(|i| sample_phase(&sim.state, &plan, i))
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| RunError::core(&ctx, e))?;
    let shot = sample_shot_frames(&plan).map_err(|e| RunError::core(&ctx, e))?;
    assemble_dataset(&plan, blocks, shot).map_err(|e| RunError::core(&ctx, e))
}

/// MLE plus bootstrap (replicates in parallel) on a calibrated dataset.
pub fn reconstruct(ds: &QuadratureDataset, mle: &MleConfig, ctx: &str) -> Result<Reconstruction> {
    let rec = mle_reconstruct(ds, mle).map_err(|e| RunError::core(ctx, e))?;
    match mle.bootstrap_resamples {
        0 => Ok(Reconstruction { bootstrap_skipped: true, ..rec }),
        b => {
            let cells = Cells::from_dataset(ds, mle).map_err(|e| RunError::core(ctx, e))?;
            let reps: Vec<_> = (0..b).into_par_iter().map(|i| bootstrap_replicate(&cells, mle, &rec, i)).collect();
            aggregate_bootstrap(&rec, &reps).map_err(|e| RunError::core(ctx, e))
        }
    }
}

pub fn reconstruct_case(cfg: &ExperimentConfig, sim: &SimulatedCase, raw: QuadratureDataset) -> Result<ReconstructedCase> {
    let ctx = format!("reconstructing herald case {}", sim.herald_n);
    let dataset = normalize_dataset(&raw).map_err(|e| RunError::core(&ctx, e))?;
    let mle = cfg.mle_for(sim.index)?;
    let reconstruction = reconstruct(&dataset, &mle, &ctx)?;
    let spec = cfg.wigner.to_spec();
    let grid = wigner_eval(&reconstruction.rho, &spec.x_axis(), &spec.p_axis());
    let negativity = negativity_report(&grid, &reconstruction.rho).map_err(|e| RunError::core(&ctx, e))?;
    let fidelity = reconstruction.rho.fidelity(&sim.state);
    Ok(ReconstructedCase { dataset: raw, reconstruction, grid, negativity, fidelity })
}

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Restrict to these herald photon numbers.
    pub cases: Option<Vec<usize>>,
    /// Write artifacts here.
    pub out: Option<PathBuf>,
}

/// Everything a run produced, before it is reduced to a report.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub report: RunReport,
    pub simulated: Vec<SimulatedCase>,
    pub reconstructed: Vec<Option<ReconstructedCase>>,
}

fn selected(cfg: &ExperimentConfig, cases: &Option<Vec<usize>>) -> Result<Vec<usize>> {
    match cases {
        None => Ok((0..cfg.taps.len()).collect()),
        Some(list) => list
            .iter()
            .map(|&n| cfg.tap(n).map(|(i, _)| i).ok_or_else(|| RunError::config("--cases", format!("no herald case {n} in config"))))
            .collect(),
    }
}

pub fn run_pipeline(cfg: &ExperimentConfig, mode: Mode, opts: &RunOptions) -> Result<RunOutput> {
    cfg.validate()?;
    let source = fit_source(cfg)?;
    let indices = selected(cfg, &opts.cases)?;
    let results = indices
        .par_iter()
        .map(|&i| {
            let sim = simulate_case(cfg, &source, i)?;
            let rec = match mode {
                Mode::Simulate => None,
                Mode::Full => {
                    let raw = sample_case(cfg, &sim)?;
                    Some(reconstruct_case(cfg, &sim, raw)?)
                }
            };
            Ok((sim, rec))
        })
        .collect::<Result<Vec<_>>>()?;
    let (simulated, reconstructed): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let report = build_report(cfg, mode, &source, &simulated, &reconstructed)?;
    if let Some(dir) = &opts.out {
        write_artifacts(dir, cfg, &report, &simulated, &reconstructed)?;
    }
    Ok(RunOutput { report, simulated, reconstructed })
}

fn build_report(
    cfg: &ExperimentConfig,
    mode: Mode,
    source: &Source,
    simulated: &[SimulatedCase],
    reconstructed: &[Option<ReconstructedCase>],
) -> Result<RunReport> {
    let cases: Vec<CaseReport> = simulated
        .iter()
        .zip(reconstructed)
        .map(|(s, r)| {
            let entry = &cfg.taps[s.index];
            CaseReport {
                herald_n: s.herald_n,
                reflectance: entry.reflectance,
                idler_efficiency: entry.idler_efficiency,
                probability: s.herald.probability,
                rate_hz: s.herald.rate_hz,
                rate_with_duty_hz: s.herald.rate_hz * cfg.duty,
                idler_leakage: s.herald.idler_leakage,
                simulated: StateMetrics::new(&s.state, &s.negativity),
                reconstructed: r.as_ref().map(|r| ReconstructedMetrics {
                    metrics: StateMetrics::new(&r.reconstruction.rho, &r.negativity),
                    w_origin_err: r.reconstruction.wigner_err_origin,
                    photon_dist_err: r.reconstruction.photon_dist_err.clone(),
                    fidelity_to_simulated: r.fidelity,
                    frames: r.dataset.frames.len(),
                    iterations_used: r.reconstruction.iterations_used,
                    converged: r.reconstruction.converged,
                }),
            }
        })
        .collect();
    let mut narrowing_records = Vec::new();
    if let Some(ref_pos) = simulated.iter().position(|s| s.herald_n == 0) {
        for (k, s) in simulated.iter().enumerate() {
            if k == ref_pos {
                continue;
            }
            let sim_ref = &simulated[ref_pos].negativity;
            let ctx = format!("narrowing for herald case {}", s.herald_n);
            let rec_pair = reconstructed[k].as_ref().zip(reconstructed[ref_pos].as_ref());
            let rec_width = rec_pair
                .map(|(a, b)| narrowing(&a.negativity, &b.negativity))
                .transpose()
                .map_err(|e| RunError::core(&ctx, e))?;
            let rec_var = rec_pair
                .map(|(a, b)| variance_narrowing(&a.negativity, &b.negativity))
                .transpose()
                .map_err(|e| RunError::core(&ctx, e))?;
            narrowing_records.push(NarrowingRecord {
                herald_n: s.herald_n,
                reference_herald_n: 0,
                simulated_width: narrowing(&s.negativity, sim_ref).map_err(|e| RunError::core(&ctx, e))?,
                simulated_variance: variance_narrowing(&s.negativity, sim_ref).map_err(|e| RunError::core(&ctx, e))?,
                reconstructed_width: rec_width,
                reconstructed_variance: rec_var,
            });
        }
    }
    Ok(RunReport {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config_hash: cfg.hash(),
        mode,
        seed: cfg.seed,
        fit: FitRecord {
            r: source.fit.r,
            squeeze_phase_deg: cfg.squeezing.phase_deg,
            fitted_efficiency: source.fit.total_efficiency,
            budget_efficiency: source.fit.budget_efficiency,
            extra_efficiency: source.fit.extra_efficiency,
            purity: source.fit.purity,
            source_efficiency: source.model.source_efficiency,
            downstream_efficiency: source.downstream_efficiency,
        },
        cases,
        narrowing: narrowing_records,
    })
}

/// Per-phase histograms of a dataset over `[-5, 5]` for plotting.
fn write_histogram(path: &Path, ds: &QuadratureDataset) -> Result<()> {
    const BINS: usize = 100;
    const HALF: f64 = 5.0;
    let width = 2.0 * HALF / BINS as f64;
    let mut out = b"phase_deg,bin_lo,bin_hi,count\n".to_vec();
    for (i, theta) in ds.phases.iter().enumerate() {
        let mut counts = [0usize; BINS];
        for v in ds.values_at(i) {
            if v.abs() < HALF {
                counts[(((v + HALF) / width) as usize).min(BINS - 1)] += 1;
            }
        }
        for (b, c) in counts.iter().enumerate() {
            let lo = -HALF + width * b as f64;
            writeln!(out, "{},{},{},{}", theta.to_degrees(), lo, lo + width, c).expect("in-memory write");
        }
    }
    std::fs::write(path, out).map_err(|e| RunError::io(path, e))
}

fn write_artifacts(
    dir: &Path,
    cfg: &ExperimentConfig,
    report: &RunReport,
    simulated: &[SimulatedCase],
    reconstructed: &[Option<ReconstructedCase>],
) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
    std::fs::write(dir.join("report.json"), report.to_json()).map_err(|e| RunError::io(dir.join("report.json"), e))?;
    std::fs::write(dir.join("summary.txt"), crate::report::format_report(report)).map_err(|e| RunError::io(dir, e))?;
    std::fs::write(dir.join("config.toml"), cfg.to_toml()).map_err(|e| RunError::io(dir, e))?;
    let stamp = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    write_json(
        &dir.join("run_info.json"),
        &serde_json::json!({ "unix_time": stamp, "threads": rayon::current_num_threads() }),
    )?;
    for (s, r) in simulated.iter().zip(reconstructed) {
        let case_dir = dir.join(format!("case_{}", s.herald_n));
        write_wigner(&case_dir, "wigner_sim", &s.grid)?;
        write_json(&case_dir.join("state_sim.json"), &StateRecord::new(&s.state))?;
        if let Some(r) = r {
            let plan = cfg.plan_for(s.index)?;
            write_dataset(&case_dir.join("data"), &r.dataset, Some(&plan))?;
            write_histogram(&case_dir.join("histogram.csv"), &r.dataset)?;
            write_json(&case_dir.join("reconstruction.json"), &ReconstructionRecord::new(&r.reconstruction))?;
            write_wigner(&case_dir, "wigner_rec", &r.grid)?;
        }
    }
    Ok(())
}

/// Density matrix as row-major real and imaginary parts.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StateRecord {
    pub n_max: usize,
    pub rho_re: Vec<Vec<f64>>,
    pub rho_im: Vec<Vec<f64>>,
}

impl StateRecord {
    pub fn new(rho: &DensityMatrix) -> Self {
        let m = rho.elements();
        let n = m.nrows();
        Self {
            n_max: rho.dim().n_max(),
            rho_re: (0..n).map(|i| (0..n).map(|j| m[(i, j)].re).collect()).collect(),
            rho_im: (0..n).map(|i| (0..n).map(|j| m[(i, j)].im).collect()).collect(),
        }
    }
}

/// Simulates and samples without reconstructing; writes datasets under `out`.
pub fn sample_only(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<(usize, QuadratureDataset)>> {
    cfg.validate()?;
    let source = fit_source(cfg)?;
    let indices = selected(cfg, &opts.cases)?;
    let sets = indices
        .par_iter()
        .map(|&i| {
            let sim = simulate_case(cfg, &source, i)?;
            Ok((sim.herald_n, sample_case(cfg, &sim)?))
        })
        .collect::<Result<Vec<_>>>()?;
    if let Some(dir) = &opts.out {
        for ((n, ds), &i) in sets.iter().zip(&indices) {
            let plan = cfg.plan_for(i)?;
            write_dataset(&dir.join(format!("case_{n}")).join("data"), ds, Some(&plan))?;
        }
    }
    Ok(sets)
}
