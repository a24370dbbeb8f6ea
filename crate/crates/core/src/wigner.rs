//! Wigner function of a truncated-Fock density matrix and the phase-space
//! non-classicality metrics built on it.
//!
//! Normalization: `hbar = 1`, vacuum `W(0,0) = 1/pi`, `integral W dx dp = 1`.

use alloc::vec::Vec;
use core::f64::consts::{FRAC_1_PI, PI};
use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fock::DensityMatrix;
use crate::special::{linspace, ln_factorial, trapezoid};

/// Convention label written next to serialized grids.
pub const CONVENTION: &str = "hbar=1, vacuum W(0,0)=1/pi";

/// Tolerance for the trapezoid normalization check.
pub const NORMALIZATION_TOLERANCE: f64 = 1e-3;

/// Values above `-NEGATIVITY_THRESHOLD` are not counted as negative regions.
/// Fock truncation leaves ~1e-7 ripples in the far tails of Gaussian states.
pub const NEGATIVITY_THRESHOLD: f64 = 1e-6;

/// Rectangular phase-space grid specification.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub np: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { x_min: -5.0, x_max: 5.0, nx: 201, p_min: -5.0, p_max: 5.0, np: 201 }
    }
}

impl GridSpec {
    pub fn x_axis(&self) -> Vec<f64> {
        linspace(self.x_min, self.x_max, self.nx)
    }

    pub fn p_axis(&self) -> Vec<f64> {
        linspace(self.p_min, self.p_max, self.np)
    }
}

/// `W(x, p)` sampled on a grid, stored x-major: `values[ix * np + ip]`.
#[derive(Clone, Debug, PartialEq)]
pub struct WignerGrid {
    pub x_axis: Vec<f64>,
    pub p_axis: Vec<f64>,
    pub values: Vec<f64>,
    /// Largest imaginary part dropped when taking the real value.
    pub max_imag: f64,
}

impl WignerGrid {
    pub fn at(&self, ix: usize, ip: usize) -> f64 {
        self.values[ix * self.p_axis.len() + ip]
    }

    /// Two-dimensional trapezoid integral.
    pub fn integral(&self) -> f64 {
        let np = self.p_axis.len();
        let rows: Vec<f64> = (0..self.x_axis.len())
            .map(|ix| trapezoid(&self.p_axis, &self.values[ix * np..(ix + 1) * np]))
            .collect();
        trapezoid(&self.x_axis, &rows)
    }

    /// Trapezoid estimate of `integral f(x, p) W(x, p) dx dp`.
    pub fn moment(&self, f: impl Fn(f64, f64) -> f64) -> f64 {
        let np = self.p_axis.len();
        let rows: Vec<f64> = (0..self.x_axis.len())
            .map(|ix| {
                let x = self.x_axis[ix];
                let ys: Vec<f64> = (0..np).map(|ip| f(x, self.p_axis[ip]) * self.at(ix, ip)).collect();
                trapezoid(&self.p_axis, &ys)
            })
            .collect();
        trapezoid(&self.x_axis, &rows)
    }

    /// Grid index and value of the smallest sample.
    pub fn argmin(&self) -> ((usize, usize), f64) {
        let np = self.p_axis.len();
        let (k, v) = self
            .values
            .iter()
            .enumerate()
            .fold((0, f64::INFINITY), |(bk, bv), (k, &v)| if v < bv { (k, v) } else { (bk, bv) });
        ((k / np, k % np), v)
    }

    /// Number of 4-connected regions where `W < -threshold`.
    pub fn negative_regions(&self, threshold: f64) -> usize {
        let nx = self.x_axis.len();
        let np = self.p_axis.len();
        let mut seen = alloc::vec![false; nx * np];
        let mut regions = 0;
        let mut stack = Vec::new();
        for start in 0..nx * np {
            if seen[start] || self.values[start] >= -threshold {
                continue;
            }
            regions += 1;
            seen[start] = true;
            stack.push(start);
            while let Some(k) = stack.pop() {
                let (ix, ip) = (k / np, k % np);
                let mut visit = |jx: usize, jp: usize| {
                    let j = jx * np + jp;
                    if !seen[j] && self.values[j] < -threshold {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if ix > 0 {
                    visit(ix - 1, ip);
                }
                if ix + 1 < nx {
                    visit(ix + 1, ip);
                }
                if ip > 0 {
                    visit(ix, ip - 1);
                }
                if ip + 1 < np {
                    visit(ix, ip + 1);
                }
            }
        }
        regions
    }
}

/// Evaluates the Fock-basis Wigner kernel
/// `W = e^{-B/2}/pi sum_{m,k} (-1)^m (2A)^k sqrt(m!/(m+k)!) L_m^k(B) rho_{m,m+k} (+ c.c.)`
/// with `A = (x + ip)/sqrt(2)` and `B = 2(x^2 + p^2)`. The scaled Laguerre
/// values are produced by upward recurrence in `m`, with the Gaussian and
/// `|2A|^k / sqrt(k!)` prefactors folded into the seed to avoid overflow.
struct Kernel<'a> {
    rho: &'a DensityMatrix,
    dim: usize,
    half_ln_fact: Vec<f64>,
}

impl<'a> Kernel<'a> {
    fn new(rho: &'a DensityMatrix) -> Self {
        let dim = rho.dim().size();
        Self { rho, dim, half_ln_fact: (0..=dim).map(|k| 0.5 * ln_factorial(k)).collect() }
    }

    fn eval(&self, x: f64, p: f64) -> Complex64 {
        let rho = self.rho.elements();
        let b = 2.0 * (x * x + p * p);
        let radius = b.sqrt();
        let phase = if radius > 0.0 { Complex64::new(x, p) / Complex64::new(x, p).norm() } else { Complex64::new(1.0, 0.0) };
        let mut rot = Complex64::new(1.0, 0.0);
        let mut total = Complex64::new(0.0, 0.0);
        for k in 0..self.dim {
            if k > 0 {
                rot *= phase;
            }
            let h0 = if k == 0 {
                (-0.5 * b).exp()
            } else if radius == 0.0 {
                0.0
            } else {
                (-0.5 * b + k as f64 * radius.ln() - self.half_ln_fact[k]).exp()
            };
            let kf = k as f64;
            let mut prev = 0.0;
            let mut cur = h0;
            let mut acc = Complex64::new(0.0, 0.0);
            for m in 0..self.dim - k {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                acc += rho[(m, m + k)] * (sign * cur);
                let mf = m as f64;
                let next = ((2.0 * mf + 1.0 + kf - b) * cur - (mf * (mf + kf)).sqrt() * prev)
                    / ((mf + 1.0) * (mf + 1.0 + kf)).sqrt();
                prev = cur;
                cur = next;
            }
            if k == 0 {
                total += acc;
            } else {
                // rho_{m+k,m} terms are the complex conjugates
                let term = acc * rot;
                total += term + term.conj();
            }
        }
        total * FRAC_1_PI
    }
}

/// `W(x, p)` at a single point.
pub fn wigner_point(rho: &DensityMatrix, x: f64, p: f64) -> f64 {
    Kernel::new(rho).eval(x, p).re
}

/// `W` on the tensor grid `x_axis * p_axis`.
pub fn wigner_eval(rho: &DensityMatrix, x_axis: &[f64], p_axis: &[f64]) -> WignerGrid {
    let kernel = Kernel::new(rho);
    let mut values = Vec::with_capacity(x_axis.len() * p_axis.len());
    let mut max_imag: f64 = 0.0;
    for &x in x_axis {
        for &p in p_axis {
            let w = kernel.eval(x, p);
            max_imag = max_imag.max(w.im.abs());
            values.push(w.re);
        }
    }
    WignerGrid { x_axis: x_axis.to_vec(), p_axis: p_axis.to_vec(), values, max_imag }
}

/// `W(0,0) = (1/pi) sum_n (-1)^n rho_nn`.
pub fn parity_origin(rho: &DensityMatrix) -> f64 {
    rho.populations()
        .iter()
        .enumerate()
        .map(|(n, p)| if n % 2 == 0 { *p } else { -*p })
        .sum::<f64>()
        / PI
}

/// Summary of the negativity and sub-Planck witness of one state.
#[derive(Clone, Debug, PartialEq)]
pub struct NegativityReport {
    pub w_origin: f64,
    pub w_min: f64,
    pub w_min_location: (f64, f64),
    /// Variance along `p` of the normalized slice `|W(0,p)| + W(0,p)`.
    pub subplanck_variance: f64,
    /// Number of connected regions with `W < -NEGATIVITY_THRESHOLD`.
    pub negative_regions: usize,
    pub grid_integral: f64,
    /// `(p_min, p_max, n)` of the slice axis, used to check comparability.
    pub slice_axis: (f64, f64, usize),
}

/// Variance of `p` under the density proportional to `|w| + w`.
pub fn positive_witness_variance(p_axis: &[f64], slice: &[f64]) -> Result<f64> {
    let f: Vec<f64> = slice.iter().map(|w| w.abs() + w).collect();
    let z = trapezoid(p_axis, &f);
    if !(z > 0.0) {
        return Err(Error::ZeroVariance);
    }
    let mean = trapezoid(p_axis, &p_axis.iter().zip(&f).map(|(p, v)| p * v).collect::<Vec<_>>()) / z;
    let second = trapezoid(p_axis, &p_axis.iter().zip(&f).map(|(p, v)| p * p * v).collect::<Vec<_>>()) / z;
    Ok(second - mean * mean)
}

/// Least-squares quadratic through the 3x3 neighbourhood of `(ix, ip)`;
/// returns the stationary point when it is a minimum inside the neighbourhood.
fn refine_minimum(grid: &WignerGrid, ix: usize, ip: usize) -> Option<(f64, f64)> {
    let (nx, np) = (grid.x_axis.len(), grid.p_axis.len());
    if ix == 0 || ip == 0 || ix + 1 >= nx || ip + 1 >= np {
        return None;
    }
    let (x0, p0) = (grid.x_axis[ix], grid.p_axis[ip]);
    let mut ata = Matrix6::<f64>::zeros();
    let mut atb = Vector6::<f64>::zeros();
    for jx in ix - 1..=ix + 1 {
        for jp in ip - 1..=ip + 1 {
            let (dx, dp) = (grid.x_axis[jx] - x0, grid.p_axis[jp] - p0);
            let row = Vector6::new(1.0, dx, dp, dx * dx, dp * dp, dx * dp);
            ata += row * row.transpose();
            atb += row * grid.at(jx, jp);
        }
    }
    let c = ata.lu().solve(&atb)?;
    let (gx, gp, hxx, hpp, hxp) = (c[1], c[2], 2.0 * c[3], 2.0 * c[4], c[5]);
    let det = hxx * hpp - hxp * hxp;
    if !(hxx > 0.0 && det > 0.0) {
        return None;
    }
    let dx = -(hpp * gx - hxp * gp) / det;
    let dp = -(hxx * gp - hxp * gx) / det;
    let hx = grid.x_axis[ix + 1] - x0;
    let hp = grid.p_axis[ip + 1] - p0;
    if dx.abs() > hx || dp.abs() > hp {
        return None;
    }
    Some((x0 + dx, p0 + dp))
}

fn grid_spacing(grid: &WignerGrid) -> f64 {
    let step = |a: &[f64]| if a.len() > 1 { (a[a.len() - 1] - a[0]).abs() / (a.len() - 1) as f64 } else { 0.0 };
    step(&grid.x_axis).max(step(&grid.p_axis))
}

/// Compass search on the exact kernel. The quadratic fit is singular when the
/// minimum lies on a rotationally symmetric ring, so this always runs after it.
/// Confined to the grid and to one spacing around the grid minimum `anchor`,
/// so a flat tail cannot pull it away.
fn polish_minimum(kernel: &Kernel, grid: &WignerGrid, anchor: (f64, f64), start: (f64, f64), w_start: f64) -> ((f64, f64), f64) {
    let spacing = grid_spacing(grid);
    let span = |a: &[f64]| (a[0].min(a[a.len() - 1]), a[0].max(a[a.len() - 1]));
    let ((x_lo, x_hi), (p_lo, p_hi)) = (span(&grid.x_axis), span(&grid.p_axis));
    let (mut loc, mut best) = (start, w_start);
    let mut step = 0.5 * spacing;
    while step > 1e-7 {
        let mut moved = false;
        for (dx, dp) in [(step, 0.0), (-step, 0.0), (0.0, step), (0.0, -step)] {
            let cand = (loc.0 + dx, loc.1 + dp);
            if (cand.0 - anchor.0).abs() > spacing
                || (cand.1 - anchor.1).abs() > spacing
                || !(x_lo..=x_hi).contains(&cand.0)
                || !(p_lo..=p_hi).contains(&cand.1)
            {
                continue;
            }
            let w = kernel.eval(cand.0, cand.1).re;
            if w < best {
                best = w;
                loc = cand;
                moved = true;
                break;
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    (loc, best)
}

/// Negativity metrics of `rho` using `grid` for the global scan.
pub fn negativity_report(grid: &WignerGrid, rho: &DensityMatrix) -> Result<NegativityReport> {
    let integral = grid.integral();
    if integral < 1.0 - NORMALIZATION_TOLERANCE {
        return Err(Error::GridTooSmall { integral });
    }
    let kernel = Kernel::new(rho);
    let ((ix, ip), grid_min) = grid.argmin();
    let mut w_min = grid_min;
    let anchor = (grid.x_axis[ix], grid.p_axis[ip]);
    let mut loc = anchor;
    if let Some((x, p)) = refine_minimum(grid, ix, ip) {
        let w = kernel.eval(x, p).re;
        if w < w_min {
            w_min = w;
            loc = (x, p);
        }
    }
    (loc, w_min) = polish_minimum(&kernel, grid, anchor, loc, w_min);
    let slice: Vec<f64> = grid.p_axis.iter().map(|&p| kernel.eval(0.0, p).re).collect();
    let subplanck_variance = positive_witness_variance(&grid.p_axis, &slice)?;
    let w_origin = parity_origin(rho);
    Ok(NegativityReport {
        w_origin,
        w_min: w_min.min(w_origin),
        w_min_location: if w_origin < w_min { (0.0, 0.0) } else { loc },
        subplanck_variance,
        negative_regions: grid.negative_regions(NEGATIVITY_THRESHOLD),
        grid_integral: integral,
        slice_axis: (grid.p_axis[0], grid.p_axis[grid.p_axis.len() - 1], grid.p_axis.len()),
    })
}

fn check_axes(a: &NegativityReport, b: &NegativityReport) -> Result<()> {
    if a.slice_axis != b.slice_axis {
        return Err(Error::AxisMismatch);
    }
    if !(b.subplanck_variance > 0.0) {
        return Err(Error::ZeroVariance);
    }
    Ok(())
}

/// Width narrowing `1 - sqrt(var_a / var_b)` of the sub-Planck witness of `a` relative to `b`.
pub fn narrowing(a: &NegativityReport, b: &NegativityReport) -> Result<f64> {
    check_axes(a, b)?;
    Ok(1.0 - (a.subplanck_variance / b.subplanck_variance).sqrt())
}

/// Variance narrowing `1 - var_a / var_b`, reported alongside [`narrowing`].
pub fn variance_narrowing(a: &NegativityReport, b: &NegativityReport) -> Result<f64> {
    check_axes(a, b)?;
    Ok(1.0 - a.subplanck_variance / b.subplanck_variance)
}
