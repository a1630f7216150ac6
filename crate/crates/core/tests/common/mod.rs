//! Oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;

/// `T_k(t)` from the trigonometric definition, extended by cosh outside [−1, 1].
pub fn cheb_t(k: usize, t: f64) -> f64 {
    if t.abs() <= 1.0 {
        (k as f64 * t.acos()).cos()
    } else {
        let s = if t < 0.0 && k % 2 == 1 { -1.0 } else { 1.0 };
        s * (k as f64 * t.abs().acosh()).cosh()
    }
}

/// `T_k'(t)` for `|t| < 1`.
pub fn cheb_dt(k: usize, t: f64) -> f64 {
    let th = t.clamp(-1.0, 1.0).acos();
    k as f64 * (k as f64 * th).sin() / th.sin()
}

/// Least-squares Chebyshev coefficients of degree `p` through `(xs, ys)` on `(a, b)`.
pub fn ls_coeffs(xs: &[f64], ys: &[f64], p: usize, a: f64, b: f64) -> Vec<f64> {
    let v = DMatrix::from_fn(xs.len(), p + 1, |i, k| cheb_t(k, (2.0 * xs[i] - a - b) / (b - a)));
    let y = DVector::from_column_slice(ys);
    let svd = v.svd(true, true);
    svd.solve(&y, 1e-14).expect("svd solve").iter().copied().collect()
}

/// Direct sum `Σ c_k T_k` on `(a, b)`.
pub fn eval_direct(c: &[f64], a: f64, b: f64, x: f64) -> f64 {
    let t = (2.0 * x - a - b) / (b - a);
    c.iter().enumerate().map(|(k, ck)| ck * cheb_t(k, t)).sum()
}

pub fn random_coeffs<R: Rng>(rng: &mut R, p: usize) -> Vec<f64> {
    (0..=p).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

/// Uniform grid of `n` points on `[a, b]`.
pub fn uniform(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

pub fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().map(f64::abs).fold(0.0, f64::max)
}
