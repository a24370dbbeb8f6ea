//! Quadrature marginals and synthetic phase-tagged homodyne data.
//!
//! Phase convention: `<n|x_theta> = e^{i n theta} psi_n(x)`, which makes the
//! marginal the distribution of `x_theta = (a e^{-i theta} + a^dag e^{i theta})/sqrt 2`.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::fock::{quadrature_moments, DensityMatrix};
use crate::special::{hermite_functions, linspace};
use crate::state_prep::SHOT_NOISE_VARIANCE;

/// Convention tag written into dataset files.
pub const DATASET_CONVENTION: &str = "hbar1_halfvac";

/// Points in the tabulated CDF used for inverse-transform sampling.
pub const CDF_POINTS: usize = 4096;

/// Half-width of the tabulation in standard deviations.
pub const CDF_SPAN_SIGMAS: f64 = 6.0;

/// Minimum number of vacuum frames accepted for calibration.
pub const MIN_SHOT_FRAMES: usize = 100;

/// `<n|x_theta>` for `n = 0..=n_max`.
pub fn fock_amplitudes(x: f64, theta: f64, n_max: usize) -> Vec<Complex64> {
    hermite_functions(x, n_max)
        .into_iter()
        .enumerate()
        .map(|(n, psi)| Complex64::from_polar(psi, n as f64 * theta))
        .collect()
}

/// `pr(x | theta) = <x_theta| rho |x_theta>` on each point of `x_axis`.
pub fn marginal_pdf(rho: &DensityMatrix, theta: f64, x_axis: &[f64]) -> Vec<f64> {
    let m = rho.elements();
    let n_max = rho.dim().n_max();
    x_axis
        .iter()
        .map(|&x| {
            let a = fock_amplitudes(x, theta, n_max);
            let mut acc = Complex64::new(0.0, 0.0);
            for (i, ai) in a.iter().enumerate() {
                let mut row = Complex64::new(0.0, 0.0);
                for (j, aj) in a.iter().enumerate() {
                    row += m[(i, j)] * aj;
                }
                acc += ai.conj() * row;
            }
            acc.re
        })
        .collect()
}

/// Seven equally spaced LO phases, 0 to 90 degrees.
pub fn default_phases() -> Vec<f64> {
    (0..7).map(|k| (15.0 * k as f64).to_radians()).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementPlan {
    /// LO phases in radians.
    pub phases: Vec<f64>,
    pub frames_per_phase: usize,
    pub shot_frames: usize,
    pub seed: u64,
    /// Additive Gaussian detector noise variance (shot-noise units). Zero by
    /// default: electronic noise is already part of the loss budget.
    pub electronic_noise: f64,
    /// Raw detector gain applied to every value, including shot frames.
    pub gain: f64,
}

impl MeasurementPlan {
    pub fn new(phases: Vec<f64>, frames_per_phase: usize, shot_frames: usize, seed: u64) -> Result<Self> {
        let plan = Self { phases, frames_per_phase, shot_frames, seed, electronic_noise: 0.0, gain: 1.0 };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::InvalidPlan("no phases"));
        }
        if self.frames_per_phase == 0 {
            return Err(Error::InvalidPlan("frames_per_phase must be at least 1"));
        }
        if self.phases.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidPlan("non-finite phase"));
        }
        for (i, a) in self.phases.iter().enumerate() {
            if self.phases[..i].contains(a) {
                return Err(Error::InvalidPlan("duplicate phase"));
            }
        }
        if !(self.electronic_noise >= 0.0 && self.electronic_noise.is_finite()) {
            return Err(Error::InvalidPlan("electronic noise must be a finite non-negative variance"));
        }
        if !(self.gain > 0.0 && self.gain.is_finite()) {
            return Err(Error::InvalidPlan("gain must be positive"));
        }
        Ok(())
    }
}

/// One homodyne sample tagged by the index of its LO phase.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    pub phase_index: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetMeta {
    pub frames_per_phase: Vec<usize>,
    pub seed: Option<u64>,
    pub convention: String,
    /// True once values are in shot-noise units (vacuum variance 1/2).
    pub calibrated: bool,
    /// Reserved for the temporal mode used to reduce traces to quadratures.
    pub mode_function: Option<String>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuadratureDataset {
    pub phases: Vec<f64>,
    pub frames: Vec<Frame>,
    pub shot_frames: Vec<f64>,
    pub meta: DatasetMeta,
}

impl QuadratureDataset {
    /// Builds a dataset, checking every frame refers to a declared phase.
    pub fn new(phases: Vec<f64>, frames: Vec<Frame>, shot_frames: Vec<f64>, calibrated: bool) -> Result<Self> {
        let mut counts = alloc::vec![0usize; phases.len()];
        for f in &frames {
            match counts.get_mut(f.phase_index) {
                Some(c) => *c += 1,
                None => return Err(Error::UnknownPhase { index: f.phase_index, phases: phases.len() }),
            }
        }
        Ok(Self {
            phases,
            frames,
            shot_frames,
            meta: DatasetMeta {
                frames_per_phase: counts,
                seed: None,
                convention: DATASET_CONVENTION.to_string(),
                calibrated,
                mode_function: None,
            },
        })
    }

    pub fn phase_of(&self, frame: &Frame) -> f64 {
        self.phases[frame.phase_index]
    }

    /// Values recorded at phase `index`.
    pub fn values_at(&self, index: usize) -> impl Iterator<Item = f64> + '_ {
        self.frames.iter().filter(move |f| f.phase_index == index).map(|f| f.value)
    }
}

/// Tabulated inverse CDF of one marginal.
struct InverseCdf {
    x: Vec<f64>,
    cdf: Vec<f64>,
}

impl InverseCdf {
    fn new(rho: &DensityMatrix, theta: f64) -> Self {
        let (mean, var) = quadrature_moments(rho, theta);
        let half = CDF_SPAN_SIGMAS * var.max(1e-6).sqrt();
        let x = linspace(mean - half, mean + half, CDF_POINTS);
        let pdf: Vec<f64> = marginal_pdf(rho, theta, &x).into_iter().map(|p| p.max(0.0)).collect();
        let mut cdf = Vec::with_capacity(CDF_POINTS);
        cdf.push(0.0);
        for i in 1..CDF_POINTS {
            let prev = cdf[i - 1];
            cdf.push(prev + 0.5 * (x[i] - x[i - 1]) * (pdf[i] + pdf[i - 1]));
        }
        let total = cdf[CDF_POINTS - 1];
        for c in &mut cdf {
            *c /= total;
        }
        Self { x, cdf }
    }

    fn sample(&self, u: f64) -> f64 {
        let k = self.cdf.partition_point(|&c| c < u).clamp(1, self.cdf.len() - 1);
        let (c0, c1) = (self.cdf[k - 1], self.cdf[k]);
        let t = if c1 > c0 { (u - c0) / (c1 - c0) } else { 0.5 };
        self.x[k - 1] + t * (self.x[k] - self.x[k - 1])
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn detector_noise(plan: &MeasurementPlan) -> Option<Normal<f64>> {
    (plan.electronic_noise > 0.0).then(|| Normal::new(0.0, plan.electronic_noise.sqrt()).expect("validated variance"))
}

/// Samples for phase `index` of `plan`, drawn from their own RNG stream so
/// phases can be generated in any order or in parallel.
pub fn sample_phase(rho: &DensityMatrix, plan: &MeasurementPlan, index: usize) -> Result<Vec<f64>> {
    plan.validate()?;
    let theta = *plan
        .phases
        .get(index)
        .ok_or(Error::UnknownPhase { index, phases: plan.phases.len() })?;
    let table = InverseCdf::new(rho, theta);
    let noise = detector_noise(plan);
    let mut rng = stream_rng(plan.seed, index as u64);
    Ok((0..plan.frames_per_phase)
        .map(|_| {
            let mut v = table.sample(rng.random::<f64>());
            if let Some(n) = &noise {
                v += n.sample(&mut rng);
            }
            v * plan.gain
        })
        .collect())
}

/// Vacuum reference frames, on the stream after the last phase.
pub fn sample_shot_frames(plan: &MeasurementPlan) -> Result<Vec<f64>> {
    plan.validate()?;
    let vac = Normal::new(0.0, SHOT_NOISE_VARIANCE.sqrt()).expect("positive variance");
    let noise = detector_noise(plan);
    let mut rng = stream_rng(plan.seed, plan.phases.len() as u64);
    Ok((0..plan.shot_frames)
        .map(|_| {
            let mut v = vac.sample(&mut rng);
            if let Some(n) = &noise {
                v += n.sample(&mut rng);
            }
            v * plan.gain
        })
        .collect())
}

/// Assembles a dataset from per-phase samples (as produced by [`sample_phase`]).
pub fn assemble_dataset(plan: &MeasurementPlan, per_phase: Vec<Vec<f64>>, shot_frames: Vec<f64>) -> Result<QuadratureDataset> {
    if per_phase.len() != plan.phases.len() {
        return Err(Error::InvalidPlan("sample blocks do not match the phase list"));
    }
    let frames = per_phase
        .into_iter()
        .enumerate()
        .flat_map(|(i, vs)| vs.into_iter().map(move |value| Frame { phase_index: i, value }))
        .collect();
    let mut ds = QuadratureDataset::new(plan.phases.clone(), frames, shot_frames, false)?;
    ds.meta.seed = Some(plan.seed);
    Ok(ds)
}

/// Draws a full dataset. Deterministic in `plan.seed`.
pub fn sample_quadratures(rho: &DensityMatrix, plan: &MeasurementPlan) -> Result<QuadratureDataset> {
    let per_phase = (0..plan.phases.len())
        .map(|i| sample_phase(rho, plan, i))
        .collect::<Result<Vec<_>>>()?;
    assemble_dataset(plan, per_phase, sample_shot_frames(plan)?)
}

/// Unbiased sample variance.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
}

/// Factor mapping the shot-frame variance to 1/2.
pub fn calibration_scale(shot_frames: &[f64]) -> Result<f64> {
    if shot_frames.len() < MIN_SHOT_FRAMES {
        return Err(Error::CalibrationQuality(shot_frames.len()));
    }
    let var = sample_variance(shot_frames);
    if !(var > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok((SHOT_NOISE_VARIANCE / var).sqrt())
}

/// Rescales frames and shot frames into shot-noise units. Calibrated datasets
/// are returned unchanged.
pub fn normalize_dataset(ds: &QuadratureDataset) -> Result<QuadratureDataset> {
    if ds.meta.calibrated {
        return Ok(ds.clone());
    }
    let s = calibration_scale(&ds.shot_frames)?;
    let mut out = ds.clone();
    for f in &mut out.frames {
        f.value *= s;
    }
    for v in &mut out.shot_frames {
        *v *= s;
    }
    out.meta.calibrated = true;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{apply_channel, FockDim};
    use crate::special::trapezoid;
    use crate::state_prep::{fit_initial_squeezing, loss_channel, squeezed_vacuum, LossBudget, MeasuredSqueezing, SqueezeParam};
    use crate::subtraction::{herald, TapConfig};
    use alloc::vec;
    use approx::assert_abs_diff_eq;
    use core::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

    fn d(n: usize) -> FockDim {
        FockDim::new(n).unwrap()
    }

    fn axis(half: f64) -> Vec<f64> {
        linspace(-half, half, 4001)
    }

    fn moments(x: &[f64], pdf: &[f64]) -> (f64, f64, f64) {
        let z = trapezoid(x, pdf);
        let m = trapezoid(x, &x.iter().zip(pdf).map(|(x, p)| x * p).collect::<Vec<_>>());
        let s = trapezoid(x, &x.iter().zip(pdf).map(|(x, p)| x * x * p).collect::<Vec<_>>());
        (z, m, s - m * m)
    }

    #[test]
    fn vacuum_marginal_is_gaussian() {
        let x = axis(6.0);
        for theta in [0.0, 0.3, FRAC_PI_2] {
            let pdf = marginal_pdf(&DensityMatrix::vacuum(d(3)), theta, &x);
            let (z, m, v) = moments(&x, &pdf);
            assert_abs_diff_eq!(z, 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(m, 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(v, 0.5, epsilon = 1e-6);
            assert_abs_diff_eq!(pdf[2000], PI.powf(-0.5), epsilon = 1e-12);
        }
    }

    #[test]
    fn single_photon_has_node_at_origin() {
        let pdf = marginal_pdf(&DensityMatrix::fock(d(2), 1), 0.7, &[0.0, 1.0]);
        assert_abs_diff_eq!(pdf[0], 0.0, epsilon = 1e-15);
        // 2 x^2 e^{-x^2} / sqrt(pi)
        assert_abs_diff_eq!(pdf[1], 2.0 * (-1.0f64).exp() / PI.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn marginal_moments_match_quadrature_operator() {
        let amps: Vec<Complex64> = vec![Complex64::new(0.6, 0.0), Complex64::new(0.3, 0.5), Complex64::new(-0.2, 0.4), Complex64::new(0.1, -0.2)];
        let rho = DensityMatrix::pure(d(3), &amps).unwrap().normalized().unwrap();
        let x = axis(8.0);
        for theta in [0.0, FRAC_PI_4, 1.1, FRAC_PI_2, 2.5] {
            let (z, m, v) = moments(&x, &marginal_pdf(&rho, theta, &x));
            let (m_op, v_op) = quadrature_moments(&rho, theta);
            assert_abs_diff_eq!(z, 1.0, epsilon = 1e-6);
            assert_abs_diff_eq!(m, m_op, epsilon = 1e-6);
            assert_abs_diff_eq!(v, v_op, epsilon = 1e-6);
        }
    }

    #[test]
    fn phase_shift_by_pi_mirrors_marginal() {
        let amps: Vec<Complex64> = vec![Complex64::new(0.5, 0.1), Complex64::new(0.3, 0.5), Complex64::new(-0.2, 0.4)];
        let rho = DensityMatrix::pure(d(2), &amps).unwrap().normalized().unwrap();
        let x = linspace(-3.0, 3.0, 61);
        let xm: Vec<f64> = x.iter().map(|v| -v).collect();
        let a = marginal_pdf(&rho, 0.4, &x);
        let b = marginal_pdf(&rho, 0.4 + PI, &xm);
        for (p, q) in a.iter().zip(&b) {
            assert_abs_diff_eq!(p, q, epsilon = 1e-13);
        }
    }

    #[test]
    fn fitted_squeezed_state_variance_ratio() {
        let meas = MeasuredSqueezing::new(2.9, 4.4).unwrap();
        let fit = fit_initial_squeezing(&meas, &LossBudget::lossless()).unwrap();
        let pure = squeezed_vacuum(fit.squeeze(0.0).unwrap(), d(40)).unwrap();
        let rho = apply_channel(&pure, &loss_channel(fit.total_efficiency, d(40)).unwrap()).unwrap();
        let x = axis(7.0);
        let (_, _, v0) = moments(&x, &marginal_pdf(&rho, 0.0, &x));
        let (_, _, v90) = moments(&x, &marginal_pdf(&rho, FRAC_PI_2, &x));
        // Gaussian oracle: measured levels relative to shot noise
        assert_abs_diff_eq!(v0, 0.5 * 10f64.powf(-0.29), epsilon = 1e-6);
        assert_abs_diff_eq!(v90, 0.5 * 10f64.powf(0.44), epsilon = 1e-6);
        assert_abs_diff_eq!(v90 / v0, 10f64.powf(0.73), epsilon = 1e-4);
    }

    #[test]
    fn vacuum_sampling_variance() {
        let plan = MeasurementPlan::new(vec![0.0], 100_000, 0, 7).unwrap();
        let ds = sample_quadratures(&DensityMatrix::vacuum(d(2)), &plan).unwrap();
        let vals: Vec<f64> = ds.values_at(0).collect();
        assert_eq!(vals.len(), 100_000);
        assert!((sample_variance(&vals) - 0.5).abs() < 0.005);
    }

    #[test]
    fn sampling_is_deterministic_and_order_free() {
        let rho = DensityMatrix::fock(d(3), 1);
        let plan = MeasurementPlan::new(default_phases(), 500, 200, 42).unwrap();
        let a = sample_quadratures(&rho, &plan).unwrap();
        assert_eq!(a, sample_quadratures(&rho, &plan).unwrap());
        let blocks: Vec<Vec<f64>> = (0..7).rev().map(|i| sample_phase(&rho, &plan, i).unwrap()).rev().collect();
        let b = assemble_dataset(&plan, blocks, sample_shot_frames(&plan).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.meta.frames_per_phase, vec![500; 7]);
        let other = MeasurementPlan { seed: 43, ..plan };
        assert_ne!(a, sample_quadratures(&rho, &other).unwrap());
    }

    #[test]
    fn subtracted_state_has_hole_at_origin() {
        let sq = squeezed_vacuum(SqueezeParam::new(0.64, PI).unwrap(), d(20)).unwrap();
        let one = herald(&sq, &TapConfig::new(0.97, 1, 0.6).unwrap(), 5e6, 1.0).unwrap().state;
        let plan = MeasurementPlan::new(vec![0.0], 20_000, 0, 3).unwrap();
        let frac = |rho: &DensityMatrix| {
            let ds = sample_quadratures(rho, &plan).unwrap();
            ds.values_at(0).filter(|v| v.abs() < 0.2).count() as f64 / 20_000.0
        };
        assert!(frac(&one) < 0.5 * frac(&DensityMatrix::vacuum(d(20))));
    }

    #[test]
    fn plan_validation() {
        assert!(MeasurementPlan::new(vec![], 1, 0, 0).is_err());
        assert!(MeasurementPlan::new(vec![0.0], 0, 0, 0).is_err());
        assert!(MeasurementPlan::new(vec![0.1, 0.1], 1, 0, 0).is_err());
    }

    #[test]
    fn unknown_phase_index_is_rejected() {
        let frames = vec![Frame { phase_index: 2, value: 0.0 }];
        assert_eq!(
            QuadratureDataset::new(vec![0.0, 1.0], frames, vec![], true),
            Err(Error::UnknownPhase { index: 2, phases: 2 })
        );
    }

    #[test]
    fn normalization() {
        let mut plan = MeasurementPlan::new(default_phases(), 200, 5_000, 9).unwrap();
        let rho = DensityMatrix::fock(d(3), 1);
        let ds = sample_quadratures(&rho, &plan).unwrap();
        let cal = normalize_dataset(&ds).unwrap();
        assert_abs_diff_eq!(sample_variance(&cal.shot_frames), 0.5, epsilon = 1e-12);
        assert_eq!(normalize_dataset(&cal).unwrap(), cal);

        plan.gain = 2.0;
        let doubled = sample_quadratures(&rho, &plan).unwrap();
        let cal2 = normalize_dataset(&doubled).unwrap();
        for (a, b) in cal.frames.iter().zip(&cal2.frames) {
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-12);
        }

        let shot: Vec<f64> = (0..200).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let var = sample_variance(&shot);
        let scaled: Vec<f64> = shot.iter().map(|v| v * (0.02 / var).sqrt()).collect();
        assert_abs_diff_eq!(calibration_scale(&scaled).unwrap(), 5.0, epsilon = 1e-12);
        assert_eq!(calibration_scale(&shot[..99]), Err(Error::CalibrationQuality(99)));
    }
}
