//! Small special-function helpers shared by the simulation modules.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent f64 math is only visible when std is linked
use num_traits::Float;

/// `ln(n!)` via the log-gamma function.
pub fn ln_factorial(n: usize) -> f64 {
    libm::lgamma(n as f64 + 1.0)
}

/// Binomial coefficient as a float, exact for the small arguments used here.
pub fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for j in 0..k {
        acc = acc * (n - j) as f64 / (j + 1) as f64;
    }
    acc
}

/// Binomial probability `C(n,k) p^k (1-p)^(n-k)`, with `0^0 = 1`.
pub fn binomial_pmf(n: usize, k: usize, p: f64) -> f64 {
    if k > n {
        return 0.0;
    }
    binomial(n, k) * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
}

/// Position-space Hermite functions `psi_0(x) ..= psi_{n_max}(x)` for the
/// convention `x = (a + a^dag)/sqrt(2)`, so the vacuum density is
/// `exp(-x^2)/sqrt(pi)`.
pub fn hermite_functions(x: f64, n_max: usize) -> Vec<f64> {
    let mut psi = vec![0.0; n_max + 1];
    psi[0] = core::f64::consts::PI.powf(-0.25) * (-0.5 * x * x).exp();
    if n_max >= 1 {
        psi[1] = core::f64::consts::SQRT_2 * x * psi[0];
    }
    for n in 1..n_max {
        let nf = n as f64;
        psi[n + 1] = (2.0 / (nf + 1.0)).sqrt() * x * psi[n] - (nf / (nf + 1.0)).sqrt() * psi[n - 1];
    }
    psi
}

/// Five-point Gauss-Legendre nodes and weights on `[-1, 1]`.
pub const GAUSS_LEGENDRE_5: [(f64, f64); 5] = [
    (0.0, 0.568_888_888_888_888_9),
    (-0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (0.538_469_310_105_683_1, 0.478_628_670_499_366_5),
    (-0.906_179_845_938_664, 0.236_926_885_056_189_1),
    (0.906_179_845_938_664, 0.236_926_885_056_189_1),
];

/// Trapezoid-rule integral of samples `y` over the (possibly non-uniform) axis `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let step = (hi - lo) / (n - 1) as f64;
            (0..n).map(|i| lo + step * i as f64).collect()
        }
    }
}
