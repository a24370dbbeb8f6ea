//! Iterative maximum-likelihood state reconstruction from homodyne data,
//! with bootstrap error bars.

use alloc::vec;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, FockDim, ZERO};
use crate::homodyne::{fock_amplitudes, QuadratureDataset};
use crate::special::GAUSS_LEGENDRE_5;
use crate::state_prep::loss_channel;
use crate::wigner::parity_origin;

/// Probabilities below this are clamped when forming `R(rho)`.
pub const PROBABILITY_FLOOR: f64 = 1e-300;

/// Allowed log-likelihood decrease per iteration before a step is rejected.
pub const MONOTONE_SLACK: f64 = 1e-10;

/// Bin half-width in sample standard deviations.
pub const BIN_SPAN_SIGMAS: f64 = 6.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Binning {
    /// Equal-width bins per phase, spanning `mean +- 6 sigma` of that phase
    /// (widened to include every frame).
    Bins(usize),
    Unbinned,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MleConfig {
    pub dim: FockDim,
    pub max_iters: usize,
    /// Convergence threshold on the relative log-likelihood change.
    pub ll_tolerance: f64,
    pub binning: Binning,
    /// `None` is the undiluted `R rho R` step; `Some(eps)` uses `(I + eps R)/(1 + eps)`.
    pub dilution: Option<f64>,
    /// Restricts the fit to real density matrices by using the real part of
    /// each projector, i.e. the average over `theta` and `-theta`.
    pub assume_real: bool,
    /// When set, projectors include this detection loss and the estimate is
    /// the state before it.
    pub detector_efficiency: Option<f64>,
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Iteration cap for each resample; resamples start from the point estimate.
    pub bootstrap_max_iters: usize,
}

impl Default for MleConfig {
    fn default() -> Self {
        Self {
            dim: FockDim::new(10).expect("non-zero"),
            max_iters: 2000,
            ll_tolerance: 1e-9,
            binning: Binning::Bins(256),
            dilution: None,
            assume_real: false,
            detector_efficiency: None,
            bootstrap_resamples: 0,
            bootstrap_seed: 0,
            bootstrap_max_iters: 500,
        }
    }
}

impl MleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::InvalidMleConfig("max_iters must be at least 1"));
        }
        if !(self.ll_tolerance > 0.0) {
            return Err(Error::InvalidMleConfig("ll_tolerance must be positive"));
        }
        if self.binning == Binning::Bins(0) {
            return Err(Error::InvalidMleConfig("bin count must be positive"));
        }
        if let Some(eps) = self.dilution {
            if !(eps > 0.0 && eps.is_finite()) {
                return Err(Error::InvalidMleConfig("dilution must be positive"));
            }
        }
        if let Some(eta) = self.detector_efficiency {
            if !(eta > 0.0 && eta <= 1.0) {
                return Err(Error::InvalidMleConfig("detector efficiency must be in (0, 1]"));
            }
        }
        if self.bootstrap_max_iters == 0 {
            return Err(Error::InvalidMleConfig("bootstrap_max_iters must be at least 1"));
        }
        Ok(())
    }
}

/// `|x_theta><x_theta|` in the Fock basis: element `(m, n)` is `<m|x_theta><x_theta|n>`.
pub fn projector(theta: f64, x: f64, dim: FockDim) -> CMatrix {
    let a = fock_amplitudes(x, theta, dim.n_max());
    let n = dim.size();
    CMatrix::from_fn(n, n, |i, j| a[i] * a[j].conj())
}

/// `integral_lo^hi |x_theta><x_theta| dx` by composite five-point Gauss-Legendre.
pub fn bin_projector(theta: f64, lo: f64, hi: f64, dim: FockDim) -> CMatrix {
    let n = dim.size();
    let mut acc = CMatrix::from_element(n, n, ZERO);
    let (mid, half) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    for &(node, w) in GAUSS_LEGENDRE_5.iter() {
        acc += projector(theta, mid + half * node, dim) * Complex64::new(w * half, 0.0);
    }
    acc
}

/// POVM elements with their observed counts. Each frame belongs to one cell,
/// so bootstrap resamples only change the counts.
#[derive(Clone, Debug)]
pub struct Cells {
    dim: FockDim,
    /// Column-major flattened projectors.
    projectors: Vec<Vec<Complex64>>,
    counts: Vec<f64>,
    /// Cell index of every frame, in dataset order.
    frame_cell: Vec<usize>,
    /// Frame indices grouped by phase.
    frames_by_phase: Vec<Vec<usize>>,
}

impl Cells {
    pub fn from_dataset(ds: &QuadratureDataset, cfg: &MleConfig) -> Result<Self> {
        cfg.validate()?;
        if !ds.meta.calibrated {
            return Err(Error::NotCalibrated);
        }
        let mut frames_by_phase = vec![Vec::new(); ds.phases.len()];
        for (k, f) in ds.frames.iter().enumerate() {
            frames_by_phase[f.phase_index].push(k);
        }
        let covered = distinct_phases(ds, &frames_by_phase);
        if covered < 2 {
            return Err(Error::InsufficientPhases(covered));
        }
        let dim = cfg.dim;
        let loss = match cfg.detector_efficiency {
            Some(eta) if eta < 1.0 => Some(loss_channel(eta, dim)?),
            _ => None,
        };
        let mut projectors = Vec::new();
        let mut frame_cell = vec![0; ds.frames.len()];
        let assume_real = cfg.assume_real;
        let mut push = |p: CMatrix| {
            let p = if assume_real { p.map(|z| Complex64::new(z.re, 0.0)) } else { p };
            let p = match &loss {
                // detection after loss: sum_k A_k^dag P A_k
                Some(ch) => ch.operators().iter().fold(CMatrix::from_element(p.nrows(), p.ncols(), ZERO), |acc, a| {
                    acc + a.adjoint() * &p * a
                }),
                None => p,
            };
            projectors.push(p.as_slice().to_vec());
            projectors.len() - 1
        };
        for (pi, idx) in frames_by_phase.iter().enumerate() {
            if idx.is_empty() {
                continue;
            }
            let theta = ds.phases[pi];
            match cfg.binning {
                Binning::Unbinned => {
                    for &k in idx {
                        frame_cell[k] = push(projector(theta, ds.frames[k].value, dim));
                    }
                }
                Binning::Bins(nb) => {
                    let vals: Vec<f64> = idx.iter().map(|&k| ds.frames[k].value).collect();
                    let (lo, hi) = bin_range(&vals);
                    let width = (hi - lo) / nb as f64;
                    let bin_of = |v: f64| (((v - lo) / width) as usize).min(nb - 1);
                    let mut cell_of_bin = vec![usize::MAX; nb];
                    for (&k, &v) in idx.iter().zip(&vals) {
                        let b = bin_of(v);
                        if cell_of_bin[b] == usize::MAX {
                            let a = lo + width * b as f64;
                            cell_of_bin[b] = push(bin_projector(theta, a, a + width, dim));
                        }
                        frame_cell[k] = cell_of_bin[b];
                    }
                }
            }
        }
        let mut counts = vec![0.0; projectors.len()];
        for &c in &frame_cell {
            counts[c] += 1.0;
        }
        Ok(Self { dim, projectors, counts, frame_cell, frames_by_phase })
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    /// Same cells with counts from a per-phase resample with replacement.
    pub fn resampled(&self, rng: &mut impl Rng) -> Self {
        let mut counts = vec![0.0; self.counts.len()];
        for idx in &self.frames_by_phase {
            for _ in 0..idx.len() {
                let k = idx[rng.random_range(0..idx.len())];
                counts[self.frame_cell[k]] += 1.0;
            }
        }
        Self { counts, ..self.clone() }
    }
}

fn distinct_phases(ds: &QuadratureDataset, by_phase: &[Vec<usize>]) -> usize {
    let mut seen: Vec<f64> = Vec::new();
    for (i, idx) in by_phase.iter().enumerate() {
        let tau = core::f64::consts::TAU;
        let t = ds.phases[i] - tau * (ds.phases[i] / tau).floor();
        if !idx.is_empty() && !seen.iter().any(|s| (s - t).abs() < 1e-12) {
            seen.push(t);
        }
    }
    seen.len()
}

fn bin_range(vals: &[f64]) -> (f64, f64) {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt().max(1e-3);
    let (mn, mx) = vals.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let lo = (mean - BIN_SPAN_SIGMAS * sd).min(mn);
    let hi = (mean + BIN_SPAN_SIGMAS * sd).max(mx);
    // keep the maximum strictly inside the last bin
    (lo, hi + 1e-9 * (hi - lo).max(1.0))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Reconstruction {
    pub rho: DensityMatrix,
    /// Mean log-likelihood per frame, one entry per accepted iterate
    /// (the first entry is the starting point).
    pub log_likelihood_trace: Vec<f64>,
    pub iterations_used: usize,
    pub converged: bool,
    /// Number of probability evaluations clamped to [`PROBABILITY_FLOOR`].
    pub floor_hits: usize,
    /// Steps that had to be diluted to keep the likelihood non-decreasing.
    pub diluted_steps: usize,
    pub photon_dist: Vec<f64>,
    pub photon_dist_err: Option<Vec<f64>>,
    pub wigner_err_origin: Option<f64>,
    /// Set when bootstrap was requested with zero resamples.
    pub bootstrap_skipped: bool,
}

struct Likelihood<'a> {
    cells: &'a Cells,
    total: f64,
}

impl<'a> Likelihood<'a> {
    fn new(cells: &'a Cells) -> Self {
        Self { cells, total: cells.counts.iter().sum() }
    }

    /// Mean log-likelihood, `R(rho)` (normalized by the frame count) and floor hits.
    fn evaluate(&self, rho: &CMatrix) -> (f64, CMatrix, usize) {
        let n = rho.nrows();
        let r = rho.as_slice();
        let mut acc = vec![ZERO; n * n];
        let mut ll = 0.0;
        let mut hits = 0;
        for (p, &c) in self.cells.projectors.iter().zip(&self.cells.counts) {
            if c == 0.0 {
                continue;
            }
            // tr(rho P) for Hermitian P
            let mut pr: f64 = r.iter().zip(p).map(|(a, b)| (a * b.conj()).re).sum();
            if !(pr >= PROBABILITY_FLOOR) {
                pr = PROBABILITY_FLOOR;
                hits += 1;
            }
            let f = c / self.total;
            ll += f * pr.ln();
            let w = f / pr;
            for (a, b) in acc.iter_mut().zip(p) {
                *a += b * w;
            }
        }
        (ll, CMatrix::from_column_slice(n, n, &acc), hits)
    }
}

/// `N[M rho M]` with `M = I + s (R - I)`. `s = 1` is the plain `R rho R` step
/// and `s = eps / (1 + eps)` the diluted one.
fn rrr_step(rho: &CMatrix, r: &CMatrix, s: f64) -> CMatrix {
    let id = CMatrix::identity(r.nrows(), r.ncols());
    let m = if s == 1.0 { r.clone() } else { &id + (r - &id) * Complex64::new(s, 0.0) };
    let next = &m * rho * &m;
    let next = (&next + next.adjoint()) * Complex64::new(0.5, 0.0);
    let tr = next.trace().re;
    next / Complex64::new(tr, 0.0)
}

/// Maximum-likelihood estimate starting from the maximally mixed state.
pub fn mle_reconstruct(ds: &QuadratureDataset, cfg: &MleConfig) -> Result<Reconstruction> {
    let cells = Cells::from_dataset(ds, cfg)?;
    let n = cfg.dim.size();
    let start = CMatrix::identity(n, n) / Complex64::new(n as f64, 0.0);
    Ok(mle_from_cells(&cells, cfg, start, cfg.max_iters))
}

/// Runs the iteration on prepared cells from `start` for at most `max_iters` steps.
pub fn mle_from_cells(cells: &Cells, cfg: &MleConfig, start: CMatrix, max_iters: usize) -> Reconstruction {
    let lik = Likelihood::new(cells);
    let mut rho = start;
    let (mut ll, mut r, mut floor_hits) = lik.evaluate(&rho);
    let mut trace = vec![ll];
    let mut converged = false;
    let mut diluted_steps = 0;
    let mut iterations = 0;
    let base = cfg.dilution.map_or(1.0, |eps| eps / (1.0 + eps));
    while iterations < max_iters {
        iterations += 1;
        let mut s = base;
        let mut accepted = None;
        for _ in 0..60 {
            let cand = rrr_step(&rho, &r, s);
            let (ll_c, r_c, hits) = lik.evaluate(&cand);
            if ll_c >= ll - MONOTONE_SLACK * ll.abs().max(1.0) {
                accepted = Some((cand, ll_c, r_c, hits));
                break;
            }
            diluted_steps += 1;
            s *= 0.5;
        }
        let Some((cand, ll_c, r_c, hits)) = accepted else {
            // no ascent direction left at machine precision
            converged = true;
            break;
        };
        floor_hits += hits;
        let rel = (ll_c - ll).abs() / ll.abs().max(f64::MIN_POSITIVE);
        rho = cand;
        ll = ll_c;
        r = r_c;
        trace.push(ll);
        if rel < cfg.ll_tolerance {
            converged = true;
            break;
        }
    }
    let rho = DensityMatrix::from_raw(cells.dim, rho);
    let photon_dist = rho.populations();
    Reconstruction {
        rho,
        log_likelihood_trace: trace,
        iterations_used: iterations,
        converged,
        floor_hits,
        diluted_steps,
        photon_dist,
        photon_dist_err: None,
        wigner_err_origin: None,
        bootstrap_skipped: false,
    }
}

/// Photon-number distribution and `W(0,0)` of bootstrap replicate `index`.
/// Replicates use independent RNG streams, so they may run in any order.
pub fn bootstrap_replicate(cells: &Cells, cfg: &MleConfig, rec: &Reconstruction, index: usize) -> (Vec<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.bootstrap_seed);
    rng.set_stream(index as u64);
    let resampled = cells.resampled(&mut rng);
    let r = mle_from_cells(&resampled, cfg, rec.rho.elements().clone(), cfg.bootstrap_max_iters);
    let w0 = parity_origin(&r.rho);
    (r.photon_dist, w0)
}

/// Attaches standard deviations across bootstrap replicates to `rec`.
pub fn aggregate_bootstrap(rec: &Reconstruction, replicates: &[(Vec<f64>, f64)]) -> Result<Reconstruction> {
    if replicates.len() < 2 {
        return Err(Error::BootstrapResamples(replicates.len()));
    }
    let n = replicates.len() as f64;
    let sd = |xs: &mut dyn Iterator<Item = f64>| {
        let v: Vec<f64> = xs.collect();
        let m = v.iter().sum::<f64>() / n;
        (v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0)).sqrt()
    };
    let dim = rec.photon_dist.len();
    let photon_err = (0..dim).map(|k| sd(&mut replicates.iter().map(|r| r.0[k]))).collect();
    let w_err = sd(&mut replicates.iter().map(|r| r.1));
    Ok(Reconstruction { photon_dist_err: Some(photon_err), wigner_err_origin: Some(w_err), bootstrap_skipped: false, ..rec.clone() })
}

/// Bootstrap error bars with `cfg.bootstrap_resamples` replicates.
/// Zero resamples returns `rec` with `bootstrap_skipped` set.
pub fn bootstrap_errors(ds: &QuadratureDataset, cfg: &MleConfig, rec: &Reconstruction) -> Result<Reconstruction> {
    match cfg.bootstrap_resamples {
        0 => Ok(Reconstruction { bootstrap_skipped: true, ..rec.clone() }),
        1 => Err(Error::BootstrapResamples(1)),
        b => {
            let cells = Cells::from_dataset(ds, cfg)?;
            let reps: Vec<_> = (0..b).map(|i| bootstrap_replicate(&cells, cfg, rec, i)).collect();
            aggregate_bootstrap(rec, &reps)
        }
    }
}
