//! Squeezed-vacuum sources, dB conversions, pure-loss channels and the
//! closed-form fit of squeezing and efficiency to a measured variance pair.

use alloc::format;
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fock::{CMatrix, DensityMatrix, FockDim, KrausChannel, ZERO};
use crate::special::binomial;

/// Quadrature variance of the vacuum (shot noise) with `hbar = 1`.
pub const SHOT_NOISE_VARIANCE: f64 = 0.5;

/// Largest population allowed beyond the cutoff when building a squeezed vacuum.
pub const SQUEEZE_LEAKAGE_LIMIT: f64 = 1e-6;

/// Squeezing strength `r >= 0` and axis angle `phase` in `[0, 2 pi)`.
///
/// `phase = 0` squeezes `x`; `phase = pi` squeezes `p`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeParam {
    r: f64,
    phase: f64,
}

impl SqueezeParam {
    pub fn new(r: f64, phase: f64) -> Result<Self> {
        if !(r >= 0.0) || !r.is_finite() {
            return Err(Error::OutOfRange { name: "r", value: r });
        }
        if !phase.is_finite() {
            return Err(Error::OutOfRange { name: "phase", value: phase });
        }
        let tau = 2.0 * core::f64::consts::PI;
        let mut phase = phase % tau;
        if phase < 0.0 {
            phase += tau;
        }
        if phase >= tau {
            phase = 0.0;
        }
        Ok(Self { r, phase })
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn phase(&self) -> f64 {
        self.phase
    }

    pub fn with_phase(self, phase: f64) -> Result<Self> {
        Self::new(self.r, phase)
    }
}

fn squeezed_amplitudes(p: SqueezeParam, dim: FockDim) -> Vec<Complex64> {
    let n = dim.size();
    let mut c = alloc::vec![ZERO; n];
    let ratio = -Complex64::from_polar(p.r.tanh(), p.phase);
    c[0] = Complex64::new(1.0 / p.r.cosh().sqrt(), 0.0);
    let mut k = 2;
    while k < n {
        let kf = k as f64;
        c[k] = c[k - 2] * ratio * ((kf * (kf - 1.0)).sqrt() / kf);
        k += 2;
    }
    c
}

/// Population of the squeezed vacuum lying beyond `dim`'s cutoff.
pub fn squeezed_vacuum_leakage(p: SqueezeParam, dim: FockDim) -> f64 {
    let kept: f64 = squeezed_amplitudes(p, dim).iter().map(|z| z.norm_sqr()).sum();
    (1.0 - kept).max(0.0)
}

/// Squeezed vacuum `S(xi)|0>` with amplitudes
/// `c_2n = (-e^{i phase} tanh r)^n sqrt((2n)!) / (2^n n! sqrt(cosh r))`,
/// renormalized after truncation.
pub fn squeezed_vacuum(p: SqueezeParam, dim: FockDim) -> Result<DensityMatrix> {
    let amps = squeezed_amplitudes(p, dim);
    let kept: f64 = amps.iter().map(|z| z.norm_sqr()).sum();
    let leakage = (1.0 - kept).max(0.0);
    if leakage >= SQUEEZE_LEAKAGE_LIMIT {
        return Err(Error::CutoffTooSmall { leakage, limit: SQUEEZE_LEAKAGE_LIMIT });
    }
    let norm = kept.sqrt();
    let amps: Vec<Complex64> = amps.into_iter().map(|z| z / norm).collect();
    DensityMatrix::pure(dim, &amps)
}

/// Squeezed-quadrature variance relative to shot noise: `10^(-db/10)`.
pub fn squeezing_db_to_ratio(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Anti-squeezed-quadrature variance relative to shot noise: `10^(db/10)`.
pub fn antisqueezing_db_to_ratio(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// `10 log10(variance / shot noise)`; negative when squeezed.
pub fn variance_to_db(variance: f64) -> f64 {
    10.0 * (variance / SHOT_NOISE_VARIANCE).log10()
}

/// Pure-loss channel of efficiency `eta`, i.e. a beamsplitter coupling to
/// vacuum. `<n-k|A_k|n> = sqrt(C(n,k)) eta^((n-k)/2) (1-eta)^(k/2)`.
pub fn loss_channel(eta: f64, dim: FockDim) -> Result<KrausChannel> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::OutOfRange { name: "efficiency", value: eta });
    }
    let n = dim.size();
    let ops = (0..n)
        .map(|k| {
            let mut a = CMatrix::zeros(n, n);
            for m in k..n {
                let amp = binomial(m, k).sqrt()
                    * eta.powf((m - k) as f64 / 2.0)
                    * (1.0 - eta).powf(k as f64 / 2.0);
                a[(m - k, m)] = Complex64::new(amp, 0.0);
            }
            a
        })
        .collect();
    KrausChannel::new(dim, ops)
}

/// Itemized signal-path losses, each a fraction in `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossBudget {
    pub opa: f64,
    pub hd_photodiodes: f64,
    pub spatial_mode: f64,
    pub temporal_mode: f64,
    pub propagation: f64,
    /// Electronic noise expressed as an equivalent optical loss.
    pub circuit_noise: f64,
}

impl LossBudget {
    pub fn lossless() -> Self {
        Self { opa: 0.0, hd_photodiodes: 0.0, spatial_mode: 0.0, temporal_mode: 0.0, propagation: 0.0, circuit_noise: 0.0 }
    }

    pub fn items(&self) -> [(&'static str, f64); 6] {
        [
            ("opa", self.opa),
            ("hd_photodiodes", self.hd_photodiodes),
            ("spatial_mode", self.spatial_mode),
            ("temporal_mode", self.temporal_mode),
            ("propagation", self.propagation),
            ("circuit_noise", self.circuit_noise),
        ]
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in self.items() {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        Ok(())
    }

    /// Product of `1 - loss` over every item.
    pub fn total_efficiency(&self) -> f64 {
        self.items().iter().map(|(_, l)| 1.0 - l).product()
    }

    /// Efficiency of the loss inside the source, applied before the tap.
    pub fn source_efficiency(&self) -> f64 {
        1.0 - self.opa
    }

    /// Efficiency of everything after the tap, applied after heralding.
    pub fn downstream_efficiency(&self) -> f64 {
        self.items().iter().skip(1).map(|(_, l)| 1.0 - l).product()
    }
}

/// Squeezing and anti-squeezing levels in dB relative to shot noise.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasuredSqueezing {
    squeezing_db: f64,
    antisqueezing_db: f64,
}

impl MeasuredSqueezing {
    pub fn new(squeezing_db: f64, antisqueezing_db: f64) -> Result<Self> {
        if !(squeezing_db > 0.0) {
            return Err(Error::OutOfRange { name: "squeezing_db", value: squeezing_db });
        }
        if !(antisqueezing_db >= squeezing_db) {
            return Err(Error::OutOfRange { name: "antisqueezing_db", value: antisqueezing_db });
        }
        Ok(Self { squeezing_db, antisqueezing_db })
    }

    pub fn squeezing_db(&self) -> f64 {
        self.squeezing_db
    }

    pub fn antisqueezing_db(&self) -> f64 {
        self.antisqueezing_db
    }
}

/// Variances `(V_squeezed, V_antisqueezed)` of a pure squeezed state with
/// parameter `r` after total efficiency `eta`.
pub fn lossy_squeezed_variances(r: f64, eta: f64) -> (f64, f64) {
    let v = SHOT_NOISE_VARIANCE;
    (eta * (-2.0 * r).exp() * v + (1.0 - eta) * v, eta * (2.0 * r).exp() * v + (1.0 - eta) * v)
}

/// Result of [`fit_initial_squeezing`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SqueezeFit {
    /// Squeezing parameter of the pure source state.
    pub r: f64,
    /// Efficiency reproducing the measured pair.
    pub total_efficiency: f64,
    /// Efficiency implied by the itemized loss budget.
    pub budget_efficiency: f64,
    /// `total_efficiency / budget_efficiency`. Below 1 means impurity the
    /// budget does not account for; above 1 means the budget overstates loss.
    pub extra_efficiency: f64,
    /// Purity `1 / (2 sqrt(V_- V_+))` of the measured Gaussian state.
    pub purity: f64,
}

impl SqueezeFit {
    pub fn squeeze(&self, phase: f64) -> Result<SqueezeParam> {
        SqueezeParam::new(self.r, phase)
    }
}

/// Solves `V_-+ = eta e^{-+2r}/2 + (1-eta)/2` for `(r, eta)` in closed form.
pub fn fit_initial_squeezing(meas: &MeasuredSqueezing, budget: &LossBudget) -> Result<SqueezeFit> {
    budget.validate()?;
    let budget_efficiency = budget.total_efficiency();
    if !(budget_efficiency > 0.0) {
        return Err(Error::OutOfRange { name: "budget.total_efficiency", value: budget_efficiency });
    }
    let a = squeezing_db_to_ratio(meas.squeezing_db);
    let b = antisqueezing_db_to_ratio(meas.antisqueezing_db);
    // eta (1 - e^{-2r}) = 1 - a,  eta (e^{2r} - 1) = b - 1
    let u = 1.0 - a;
    let v = b - 1.0;
    if !(v > u) {
        return Err(Error::InconsistentSqueezing(format!(
            "anti-squeezing excess {v} does not exceed squeezing deficit {u}"
        )));
    }
    let r = 0.5 * (v / u).ln();
    let eta = u * v / (v - u);
    if eta > 1.0 + 1e-12 {
        return Err(Error::InconsistentSqueezing(format!("required efficiency {eta} exceeds 1")));
    }
    let eta = eta.min(1.0);
    let (vm, vp) = lossy_squeezed_variances(r, eta);
    Ok(SqueezeFit {
        r,
        total_efficiency: eta,
        budget_efficiency,
        extra_efficiency: eta / budget_efficiency,
        purity: 1.0 / (2.0 * (vm * vp).sqrt()),
    })
}
