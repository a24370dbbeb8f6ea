//! Photon subtraction: tap beamsplitter, lossy photon-number-resolving
//! detection of the idler, and extraction of the heralded signal state.

use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fock::{tensor, CMatrix, DensityMatrix, FockDim, ZERO};
use crate::special::{binomial, binomial_pmf, ln_factorial};
use crate::state_prep::{loss_channel, squeezed_vacuum, SqueezeParam};

/// Tap beamsplitter and idler detector settings for one herald case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TapConfig {
    /// Fraction of the power kept in the signal mode.
    pub reflectance: f64,
    /// Photon number the detector must report.
    pub herald_n: usize,
    /// Total idler-path efficiency, detector included.
    pub idler_efficiency: f64,
    /// Mean Poissonian dark counts per detection window. Zero disables the model.
    pub dark_count_mean: f64,
}

impl TapConfig {
    pub fn new(reflectance: f64, herald_n: usize, idler_efficiency: f64) -> Result<Self> {
        let tap = Self { reflectance, herald_n, idler_efficiency, dark_count_mean: 0.0 };
        tap.validate()?;
        Ok(tap)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.reflectance) {
            return Err(Error::OutOfRange { name: "reflectance", value: self.reflectance });
        }
        if !(0.0..=1.0).contains(&self.idler_efficiency) {
            return Err(Error::OutOfRange { name: "idler_efficiency", value: self.idler_efficiency });
        }
        if !(self.dark_count_mean >= 0.0) || !self.dark_count_mean.is_finite() {
            return Err(Error::OutOfRange { name: "dark_count_mean", value: self.dark_count_mean });
        }
        Ok(())
    }
}

/// Numerical knobs for [`herald_with`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HeraldOptions {
    /// Idler cutoff; `None` means `herald_n + 6`.
    pub idler_cutoff: Option<usize>,
    /// Heralds less likely than this are treated as degenerate.
    pub probability_floor: f64,
    /// Largest trace lost to idler truncation.
    pub leakage_limit: f64,
}

impl Default for HeraldOptions {
    fn default() -> Self {
        Self { idler_cutoff: None, probability_floor: 1e-12, leakage_limit: 1e-8 }
    }
}

/// Normalized heralded state with its success probability and event rate.
#[derive(Clone, Debug, PartialEq)]
pub struct HeraldResult {
    pub state: DensityMatrix,
    pub probability: f64,
    pub rate_hz: f64,
    /// Trace discarded by the idler cutoff.
    pub idler_leakage: f64,
}

/// Two-mode beamsplitter on `signal (x) idler` in the flat index
/// `n_s * (dim_i.n_max + 1) + n_i`.
///
/// Creation operators transform as
/// `a_s^dag -> sqrt(R) a_s^dag - sqrt(1-R) a_i^dag` and
/// `a_i^dag -> sqrt(1-R) a_s^dag + sqrt(R) a_i^dag`,
/// so `|1,0> -> sqrt(R)|1,0> - sqrt(1-R)|0,1>`. Components pushed beyond
/// either cutoff are dropped, so the matrix is unitary only on the subspace
/// whose total photon number fits in both modes.
pub fn beamsplitter_op(reflectance: f64, dim_s: FockDim, dim_i: FockDim) -> Result<CMatrix> {
    if !(0.0..=1.0).contains(&reflectance) {
        return Err(Error::OutOfRange { name: "reflectance", value: reflectance });
    }
    let ds = dim_s.size();
    let di = dim_i.size();
    let sr = reflectance.sqrt();
    let st = (1.0 - reflectance).sqrt();
    let mut u = CMatrix::zeros(ds * di, ds * di);
    for n in 0..ds {
        for m in 0..di {
            let col = n * di + m;
            let norm = 0.5 * (ln_factorial(n) + ln_factorial(m));
            for j in 0..=n {
                for l in 0..=m {
                    let out_s = j + l;
                    let out_i = n - j + m - l;
                    if out_s >= ds || out_i >= di {
                        continue;
                    }
                    let weight = binomial(n, j)
                        * binomial(m, l)
                        * sr.powi(j as i32)
                        * st.powi((n - j) as i32)
                        * st.powi(l as i32)
                        * sr.powi((m - l) as i32);
                    if weight == 0.0 {
                        continue;
                    }
                    let sign = if (n - j) % 2 == 1 { -1.0 } else { 1.0 };
                    let fact = (0.5 * (ln_factorial(out_s) + ln_factorial(out_i)) - norm).exp();
                    u[(out_s * di + out_i, col)] += Complex64::new(sign * weight * fact, 0.0);
                }
            }
        }
    }
    Ok(u)
}

fn poisson_pmf(k: usize, mean: f64) -> f64 {
    if mean == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// Diagonal of the photon-counting POVM element for outcome `n`:
/// `Pi_n = sum_{m>=n} C(m,n) eta^n (1-eta)^(m-n) |m><m|`.
pub fn pnrd_povm_diagonal(n: usize, eta: f64, dim: FockDim) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange { name: "idler_efficiency", value: eta });
    }
    Ok((0..dim.size()).map(|m| binomial_pmf(m, n, eta)).collect())
}

/// Photon-counting POVM element with binomial detection efficiency.
pub fn pnrd_povm(n: usize, eta: f64, dim: FockDim) -> Result<CMatrix> {
    let diag = pnrd_povm_diagonal(n, eta, dim)?;
    let d = dim.size();
    Ok(CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(diag[i], 0.0) } else { ZERO }))
}

/// POVM element for outcome `n` including Poissonian dark counts of the given mean.
pub fn pnrd_povm_with_dark_counts(n: usize, eta: f64, dark_mean: f64, dim: FockDim) -> Result<CMatrix> {
    if dark_mean == 0.0 {
        return pnrd_povm(n, eta, dim);
    }
    let d = dim.size();
    let mut diag = alloc::vec![0.0; d];
    for k in 0..=n {
        let w = poisson_pmf(k, dark_mean);
        for (slot, v) in diag.iter_mut().zip(pnrd_povm_diagonal(n - k, eta, dim)?) {
            *slot += w * v;
        }
    }
    Ok(CMatrix::from_fn(d, d, |i, j| if i == j { Complex64::new(diag[i], 0.0) } else { ZERO }))
}

/// Heralds with default [`HeraldOptions`].
pub fn herald(rho_in: &DensityMatrix, tap: &TapConfig, rep_rate_hz: f64, duty: f64) -> Result<HeraldResult> {
    herald_with(rho_in, tap, rep_rate_hz, duty, &HeraldOptions::default())
}

/// Tensor with idler vacuum, apply the tap beamsplitter, project the idler
/// onto the detector outcome and trace it out. The success probability is the
/// trace of the conditional signal state, which is then normalized.
/// `rate_hz = probability * rep_rate_hz * duty`.
pub fn herald_with(
    rho_in: &DensityMatrix,
    tap: &TapConfig,
    rep_rate_hz: f64,
    duty: f64,
    opts: &HeraldOptions,
) -> Result<HeraldResult> {
    tap.validate()?;
    let dim_s = rho_in.dim();
    let dim_i = FockDim::new(opts.idler_cutoff.unwrap_or(tap.herald_n + 6).max(tap.herald_n).max(1))?;
    let joint = tensor(rho_in, &DensityMatrix::vacuum(dim_i));
    let u = beamsplitter_op(tap.reflectance, dim_s, dim_i)?;
    let mixed = joint.conjugate_by(&u)?;
    let idler_leakage = (joint.trace() - mixed.trace()).max(0.0);
    if idler_leakage > opts.leakage_limit {
        return Err(Error::IdlerLeakage { leakage: idler_leakage, limit: opts.leakage_limit });
    }
    let povm = pnrd_povm_with_dark_counts(tap.herald_n, tap.idler_efficiency, tap.dark_count_mean, dim_i)?;
    let conditional = mixed.project_idler(&povm)?;
    let probability = conditional.trace();
    if !(probability >= opts.probability_floor) {
        return Err(Error::DegenerateHerald { probability, floor: opts.probability_floor });
    }
    Ok(HeraldResult {
        state: conditional.normalized()?,
        probability,
        rate_hz: probability * rep_rate_hz * duty,
        idler_leakage,
    })
}

/// Squeezed source with internal loss, shared by all herald cases.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SourceModel {
    pub squeeze: SqueezeParam,
    /// Efficiency applied before the tap (e.g. loss inside the OPA).
    pub source_efficiency: f64,
}

impl SourceModel {
    pub fn state(&self, dim: FockDim) -> Result<DensityMatrix> {
        let rho = squeezed_vacuum(self.squeeze, dim)?;
        crate::fock::apply_channel(&rho, &loss_channel(self.source_efficiency, dim)?)
    }
}

/// One row of [`count_rate_table`].
#[derive(Clone, Debug, PartialEq)]
pub struct RateRow {
    pub tap: TapConfig,
    pub probability: f64,
    pub rate_hz: f64,
}

/// Heralding probability and event rate (duty ratio not applied) for each tap setting.
pub fn count_rate_table(taps: &[TapConfig], source: &SourceModel, dim: FockDim, rep_rate_hz: f64) -> Result<Vec<RateRow>> {
    let rho = source.state(dim)?;
    taps.iter()
        .map(|tap| {
            herald(&rho, tap, rep_rate_hz, 1.0).map(|h| RateRow { tap: *tap, probability: h.probability, rate_hz: h.rate_hz })
        })
        .collect()
}
