//! Truncated Fock-space linear algebra for one optical mode and for the
//! signal/idler pair used during heralding.
//!
//! Conventions: `hbar = 1`, `x = (a + a^dag)/sqrt(2)`, so the vacuum
//! quadrature variance is 1/2. Two-mode states use the flat index
//! `n_s * (idler.n_max + 1) + n_i`.

use alloc::vec::Vec;
use nalgebra::DMatrix;
use num_complex::Complex64;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Numerical tolerances used for validity checks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerances {
    /// Element-wise Hermiticity tolerance.
    pub hermitian: f64,
    /// Smallest eigenvalue accepted as positive semidefinite is `-psd_floor`.
    pub psd_floor: f64,
    /// Allowed deviation of `sum_k A_k^dag A_k` from the identity.
    pub completeness: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { hermitian: 1e-12, psd_floor: 1e-10, completeness: 1e-10 }
    }
}

/// Photon-number cutoff. The Hilbert-space dimension is `n_max + 1`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FockDim(usize);

impl FockDim {
    pub fn new(n_max: usize) -> Result<Self> {
        if n_max < 1 {
            return Err(Error::InvalidCutoff(n_max));
        }
        Ok(Self(n_max))
    }

    pub fn n_max(self) -> usize {
        self.0
    }

    /// Hilbert-space dimension.
    pub fn size(self) -> usize {
        self.0 + 1
    }
}

fn check_square(m: &CMatrix, dim: FockDim) -> Result<()> {
    if m.nrows() != dim.size() || m.ncols() != dim.size() {
        return Err(Error::ShapeMismatch { expected: dim.size(), rows: m.nrows(), cols: m.ncols() });
    }
    Ok(())
}

/// Largest element-wise deviation `|m - m^dag|`.
pub fn hermiticity_error(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Eigen-decomposition of a Hermitian matrix: (ascending eigenvalues, eigenvectors as columns).
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = m.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap_or(core::cmp::Ordering::Equal));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), m.ncols(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Square root of a positive semidefinite Hermitian matrix, clipping negative eigenvalues.
pub fn psd_sqrt(m: &CMatrix) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let n = m.nrows();
    let scaled = CMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * values[c].max(0.0).sqrt());
    &scaled * vectors.adjoint()
}

/// Mixed state of one mode in the truncated Fock basis.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    dim: FockDim,
    elements: CMatrix,
}

impl DensityMatrix {
    /// Wraps a Hermitian matrix. Trace and positivity are not enforced here;
    /// use [`DensityMatrix::validate`] for a full check.
    pub fn new(dim: FockDim, elements: CMatrix) -> Result<Self> {
        check_square(&elements, dim)?;
        let err = hermiticity_error(&elements);
        if err > Tolerances::default().hermitian {
            return Err(Error::NotHermitian(err));
        }
        Ok(Self { dim, elements })
    }

    pub(crate) fn from_raw(dim: FockDim, elements: CMatrix) -> Self {
        debug_assert_eq!(elements.nrows(), dim.size());
        Self { dim, elements }
    }

    pub fn vacuum(dim: FockDim) -> Self {
        Self::fock(dim, 0)
    }

    /// Number state `|n><n|`. Panics if `n > n_max`.
    pub fn fock(dim: FockDim, n: usize) -> Self {
        assert!(n <= dim.n_max(), "Fock state beyond cutoff");
        let mut m = CMatrix::zeros(dim.size(), dim.size());
        m[(n, n)] = ONE;
        Self { dim, elements: m }
    }

    /// `|psi><psi|` for the given amplitudes, taken as-is (no normalization).
    pub fn pure(dim: FockDim, amplitudes: &[Complex64]) -> Result<Self> {
        if amplitudes.len() != dim.size() {
            return Err(Error::ShapeMismatch { expected: dim.size(), rows: amplitudes.len(), cols: 1 });
        }
        let n = dim.size();
        let m = CMatrix::from_fn(n, n, |i, j| amplitudes[i] * amplitudes[j].conj());
        Ok(Self { dim, elements: m })
    }

    /// Diagonal state with the given populations.
    pub fn diagonal(dim: FockDim, populations: &[f64]) -> Result<Self> {
        if populations.len() != dim.size() {
            return Err(Error::ShapeMismatch { expected: dim.size(), rows: populations.len(), cols: 1 });
        }
        let n = dim.size();
        let m = CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(populations[i], 0.0) } else { ZERO });
        Ok(Self { dim, elements: m })
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    pub fn into_elements(self) -> CMatrix {
        self.elements
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    pub fn populations(&self) -> Vec<f64> {
        self.elements.diagonal().iter().map(|z| z.re).collect()
    }

    /// Rescales to unit trace.
    pub fn normalized(&self) -> Result<Self> {
        let t = self.trace();
        if !(t > 0.0) {
            return Err(Error::ZeroTrace);
        }
        Ok(Self { dim: self.dim, elements: self.elements.map(|z| z / t) })
    }

    /// `trace(rho * op)`.
    pub fn expectation(&self, op: &CMatrix) -> Result<Complex64> {
        check_square(op, self.dim)?;
        let n = self.dim.size();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.elements[(i, j)] * op[(j, i)];
            }
        }
        Ok(acc)
    }

    pub fn hermiticity_error(&self) -> f64 {
        hermiticity_error(&self.elements)
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let (values, _) = hermitian_eigen(&self.elements);
        values[0]
    }

    pub fn purity(&self) -> f64 {
        (&self.elements * &self.elements).trace().re
    }

    /// Checks Hermiticity, positivity and `trace <= 1`.
    pub fn validate(&self, tol: &Tolerances) -> Result<()> {
        let h = self.hermiticity_error();
        if h > tol.hermitian {
            return Err(Error::NotHermitian(h));
        }
        let t = self.trace();
        if !(-tol.psd_floor..=1.0 + tol.completeness).contains(&t) {
            return Err(Error::OutOfRange { name: "trace", value: t });
        }
        let lo = self.min_eigenvalue();
        if lo < -tol.psd_floor {
            return Err(Error::OutOfRange { name: "min_eigenvalue", value: lo });
        }
        Ok(())
    }

    /// Copy into another cutoff, zero-padding or dropping the excess rows and columns.
    pub fn embed(&self, dim: FockDim) -> Self {
        let n = dim.size();
        let src = self.dim.size();
        let m = CMatrix::from_fn(n, n, |i, j| if i < src && j < src { self.elements[(i, j)] } else { ZERO });
        Self { dim, elements: m }
    }

    /// Uhlmann fidelity `(tr sqrt(sqrt(rho) sigma sqrt(rho)))^2`. States with
    /// different cutoffs are compared in the larger space.
    pub fn fidelity(&self, other: &DensityMatrix) -> f64 {
        let dim = if self.dim >= other.dim { self.dim } else { other.dim };
        let a = self.embed(dim);
        let b = other.embed(dim);
        let sa = psd_sqrt(&a.elements);
        let inner = &sa * &b.elements * &sa;
        let (values, _) = hermitian_eigen(&inner);
        let s: f64 = values.iter().map(|v| v.max(0.0).sqrt()).sum();
        s * s
    }
}

/// Annihilation operator, `<n-1|a|n> = sqrt(n)`. At the cutoff
/// `a|n_max> = sqrt(n_max)|n_max - 1>`; nothing maps into `|n_max>`.
pub fn annihilation_op(dim: FockDim) -> CMatrix {
    let n = dim.size();
    CMatrix::from_fn(n, n, |i, j| if j == i + 1 { Complex64::new((j as f64).sqrt(), 0.0) } else { ZERO })
}

pub fn creation_op(dim: FockDim) -> CMatrix {
    annihilation_op(dim).adjoint()
}

pub fn number_op(dim: FockDim) -> CMatrix {
    let n = dim.size();
    CMatrix::from_fn(n, n, |i, j| if i == j { Complex64::new(i as f64, 0.0) } else { ZERO })
}

/// Quadrature `x_theta = (a e^{-i theta} + a^dag e^{i theta}) / sqrt(2)`.
pub fn quadrature_op(dim: FockDim, theta: f64) -> CMatrix {
    let a = annihilation_op(dim);
    let ph = Complex64::from_polar(1.0, -theta);
    let scale = core::f64::consts::FRAC_1_SQRT_2;
    (a.map(|z| z * ph) + a.adjoint().map(|z| z * ph.conj())).map(|z| z * scale)
}

/// Quadrature mean and variance `(<x_theta>, <x_theta^2> - <x_theta>^2)`.
/// Evaluated one level above the cutoff so `x^2` is exact on the support of `rho`.
pub fn quadrature_moments(rho: &DensityMatrix, theta: f64) -> (f64, f64) {
    let rho = rho.embed(FockDim(rho.dim.0 + 1));
    let x = quadrature_op(rho.dim, theta);
    let x2 = &x * &x;
    let mean = rho.expectation(&x).map(|z| z.re).unwrap_or(0.0);
    let second = rho.expectation(&x2).map(|z| z.re).unwrap_or(0.0);
    (mean, second - mean * mean)
}

/// Completely positive map in Kraus form.
#[derive(Clone, Debug)]
pub struct KrausChannel {
    dim: FockDim,
    operators: Vec<CMatrix>,
}

impl KrausChannel {
    pub fn new(dim: FockDim, operators: Vec<CMatrix>) -> Result<Self> {
        for op in &operators {
            check_square(op, dim)?;
        }
        Ok(Self { dim, operators })
    }

    pub fn identity(dim: FockDim) -> Self {
        Self { dim, operators: alloc::vec![CMatrix::identity(dim.size(), dim.size())] }
    }

    pub fn dim(&self) -> FockDim {
        self.dim
    }

    pub fn operators(&self) -> &[CMatrix] {
        &self.operators
    }

    /// Max element-wise deviation of `sum_k A_k^dag A_k` from the identity.
    pub fn completeness_error(&self) -> f64 {
        let n = self.dim.size();
        let mut sum = CMatrix::zeros(n, n);
        for a in &self.operators {
            sum += a.adjoint() * a;
        }
        sum -= CMatrix::identity(n, n);
        sum.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `rho -> sum_k A_k rho A_k^dag`.
pub fn apply_channel(rho: &DensityMatrix, ch: &KrausChannel) -> Result<DensityMatrix> {
    if rho.dim != ch.dim {
        return Err(Error::ShapeMismatch { expected: ch.dim.size(), rows: rho.dim.size(), cols: rho.dim.size() });
    }
    let n = rho.dim.size();
    let mut out = CMatrix::zeros(n, n);
    for a in &ch.operators {
        out += a * &rho.elements * a.adjoint();
    }
    Ok(DensityMatrix { dim: rho.dim, elements: out })
}

/// Joint state of signal and idler modes.
#[derive(Clone, Debug, PartialEq)]
pub struct TwoModeState {
    signal: FockDim,
    idler: FockDim,
    elements: CMatrix,
}

impl TwoModeState {
    pub fn new(signal: FockDim, idler: FockDim, elements: CMatrix) -> Result<Self> {
        let n = signal.size() * idler.size();
        if elements.nrows() != n || elements.ncols() != n {
            return Err(Error::ShapeMismatch { expected: n, rows: elements.nrows(), cols: elements.ncols() });
        }
        Ok(Self { signal, idler, elements })
    }

    pub fn signal_dim(&self) -> FockDim {
        self.signal
    }

    pub fn idler_dim(&self) -> FockDim {
        self.idler
    }

    pub fn elements(&self) -> &CMatrix {
        &self.elements
    }

    /// Flat index of `|n_s, n_i>`.
    pub fn index(&self, n_s: usize, n_i: usize) -> usize {
        n_s * self.idler.size() + n_i
    }

    pub fn trace(&self) -> f64 {
        self.elements.diagonal().iter().map(|z| z.re).sum()
    }

    /// `U rho U^dag` for an operator on the joint space.
    pub fn conjugate_by(&self, u: &CMatrix) -> Result<Self> {
        let n = self.elements.nrows();
        if u.nrows() != n || u.ncols() != n {
            return Err(Error::ShapeMismatch { expected: n, rows: u.nrows(), cols: u.ncols() });
        }
        Ok(Self { signal: self.signal, idler: self.idler, elements: u * &self.elements * u.adjoint() })
    }

    /// `tr_idler[(I (x) op) rho]`: unnormalized signal state conditioned on an
    /// idler measurement outcome with POVM element `op`.
    pub fn project_idler(&self, op: &CMatrix) -> Result<DensityMatrix> {
        check_square(op, self.idler)?;
        let ds = self.signal.size();
        let di = self.idler.size();
        let mut out = CMatrix::zeros(ds, ds);
        for a in 0..ds {
            for b in 0..ds {
                let mut acc = ZERO;
                for i in 0..di {
                    for j in 0..di {
                        let o = op[(i, j)];
                        if o != ZERO {
                            acc += o * self.elements[(a * di + j, b * di + i)];
                        }
                    }
                }
                out[(a, b)] = acc;
            }
        }
        Ok(DensityMatrix { dim: self.signal, elements: out })
    }
}

/// Kronecker product `rho_s (x) rho_i`.
pub fn tensor(rho_s: &DensityMatrix, rho_i: &DensityMatrix) -> TwoModeState {
    TwoModeState { signal: rho_s.dim, idler: rho_i.dim, elements: rho_s.elements.kronecker(&rho_i.elements) }
}

/// Reduced signal state.
pub fn partial_trace_idler(st: &TwoModeState) -> DensityMatrix {
    let ds = st.signal.size();
    let di = st.idler.size();
    let m = CMatrix::from_fn(ds, ds, |a, b| (0..di).map(|i| st.elements[(a * di + i, b * di + i)]).sum());
    DensityMatrix { dim: st.signal, elements: m }
}
