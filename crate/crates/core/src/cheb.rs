//! Chebyshev series, Clenshaw–Curtis grids and FFT-based interpolation.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{data, parameter, structural, Result};

/// Number of points used for grid estimates of polynomial sup-norms.
pub const SUP_GRID: usize = 4097;

/// `Σ v_k T_k(F⁻¹(x))` on the interval `(a, b)`, with `F` the affine map from `(−1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebSeries {
    coeffs: Vec<f64>,
    a: f64,
    b: f64,
}

impl ChebSeries {
    pub fn new(coeffs: Vec<f64>, a: f64, b: f64) -> Result<Self> {
        if coeffs.is_empty() {
            return structural("a Chebyshev series needs at least one coefficient");
        }
        if !(a < b) || !a.is_finite() || !b.is_finite() {
            return parameter(format!("interval ({a}, {b}) is not a finite interval with a < b"));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return data("non-finite Chebyshev coefficient");
        }
        Ok(ChebSeries { coeffs, a, b })
    }

    /// Series on the reference interval (−1, 1).
    pub fn reference(coeffs: Vec<f64>) -> Result<Self> {
        Self::new(coeffs, -1.0, 1.0)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Declared degree, `coeffs.len() − 1`.
    pub fn degree(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Maps `x ∈ (a, b)` to the reference variable.
    pub fn to_reference(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    /// Same coefficients on another interval.
    pub fn with_interval(&self, a: f64, b: f64) -> Result<Self> {
        Self::new(self.coeffs.clone(), a, b)
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        clenshaw(&self.coeffs, self.to_reference(x))
    }

    /// Derivative with respect to `x`, as a series on the same interval.
    pub fn derivative(&self) -> ChebSeries {
        let c = &self.coeffs;
        let n = c.len() - 1;
        if n == 0 {
            return ChebSeries { coeffs: vec![0.0], a: self.a, b: self.b };
        }
        let mut d = vec![0.0; n + 1];
        for k in (1..=n).rev() {
            d[k - 1] = d.get(k + 1).copied().unwrap_or(0.0) + 2.0 * k as f64 * c[k];
        }
        d[0] /= 2.0;
        d.truncate(n);
        let s = 2.0 / (self.b - self.a);
        ChebSeries { coeffs: d.into_iter().map(|v| v * s).collect(), a: self.a, b: self.b }
    }

    /// Grid estimate of the sup-norm on the interval (a lower bound).
    pub fn sup_norm_estimate(&self) -> f64 {
        let (a, b) = (self.a, self.b);
        cc_points(SUP_GRID - 1, a, b).iter().map(|&x| self.eval(x).abs()).fold(0.0, f64::max)
    }
}

fn clenshaw(c: &[f64], t: f64) -> f64 {
    let (mut b1, mut b2) = (0.0, 0.0);
    for &ck in c.iter().skip(1).rev() {
        let b0 = ck + 2.0 * t * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    c[0] + t * b1 - b2
}

/// `T_k(t)` and `T_k'(t)` by the three-term recurrence.
pub fn chebyshev_t(k: usize, t: f64) -> (f64, f64) {
    let (mut v0, mut v1) = (1.0, t);
    let (mut d0, mut d1) = (0.0, 1.0);
    if k == 0 {
        return (v0, d0);
    }
    for _ in 1..k {
        let v2 = 2.0 * t * v1 - v0;
        let d2 = 2.0 * v1 + 2.0 * t * d1 - d0;
        (v0, v1, d0, d1) = (v1, v2, d1, d2);
    }
    (v1, d1)
}

/// Clenshaw–Curtis grid of degree `p` on `(a, b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcGrid {
    p: usize,
    a: f64,
    b: f64,
    points: Vec<f64>,
}

impl CcGrid {
    pub fn degree(&self) -> usize {
        self.p
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.a, self.b)
    }

    /// Points `x_j`, decreasing from `b` to `a`.
    pub fn points(&self) -> &[f64] {
        &self.points
    }
}

/// The points `(a+b)/2 + (b−a)/2 cos(jπ/p)`, `j = 0..=p`, with exact endpoints.
pub fn cc_points(p: usize, a: f64, b: f64) -> Vec<f64> {
    let mid = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut pts: Vec<f64> = (0..=p)
        .map(|j| {
            // sin form keeps the grid symmetric in floating point
            let s = (std::f64::consts::PI * (p as f64 - 2.0 * j as f64) / (2.0 * p as f64)).sin();
            mid + half * s
        })
        .collect();
    pts[0] = b;
    pts[p] = a;
    pts
}

pub fn cc_grid(p: usize, a: f64, b: f64) -> Result<CcGrid> {
    if p == 0 {
        return parameter("Clenshaw–Curtis grid needs degree p >= 1");
    }
    if !(a < b) || !a.is_finite() || !b.is_finite() {
        return parameter(format!("interval ({a}, {b}) is not a finite interval with a < b"));
    }
    Ok(CcGrid { p, a, b, points: cc_points(p, a, b) })
}

/// Coefficients of the interpolant through `values` at the grid points, via a
/// length-2p inverse FFT of the even extension.
pub fn cc_interpolate(values: &[f64], grid: &CcGrid) -> Result<ChebSeries> {
    let p = grid.p;
    if values.len() != p + 1 {
        return structural(format!("expected {} samples, got {}", p + 1, values.len()));
    }
    if let Some(j) = values.iter().position(|v| !v.is_finite()) {
        return data(format!("non-finite sample at grid index {j}"));
    }
    let n = 2 * p;
    let mut buf: Vec<Complex<f64>> =
        (0..n).map(|j| Complex::new(values[if j <= p { j } else { n - j }], 0.0)).collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let coeffs = (0..=p)
        .map(|k| {
            let w = if k == 0 || k == p { 1.0 } else { 2.0 };
            w * buf[k].re / n as f64
        })
        .collect();
    ChebSeries::new(coeffs, grid.a, grid.b)
}

/// Lebesgue constant of CC interpolation of degree `p`, maximized over 10001 uniform points.
pub fn lebesgue_constant(p: usize) -> Result<f64> {
    if p == 0 {
        return parameter("Lebesgue constant needs p >= 1");
    }
    let nodes = cc_points(p, -1.0, 1.0);
    let w: Vec<f64> = (0..=p)
        .map(|j| {
            let s = if j % 2 == 0 { 1.0 } else { -1.0 };
            if j == 0 || j == p {
                0.5 * s
            } else {
                s
            }
        })
        .collect();
    let n = 10_001;
    let mut best: f64 = 0.0;
    for i in 0..n {
        let x = -1.0 + 2.0 * i as f64 / (n - 1) as f64;
        let lam = if nodes.contains(&x) {
            1.0
        } else {
            let (mut num, mut den) = (0.0, 0.0);
            for (xj, wj) in nodes.iter().zip(&w) {
                let q = wj / (x - xj);
                num += q.abs();
                den += q;
            }
            num / den.abs()
        };
        best = best.max(lam);
    }
    Ok(best)
}

/// `Σ_{ℓ≥2} |v_ℓ|`.
pub fn coeff_tail_sum(series: &ChebSeries) -> f64 {
    series.coeffs.iter().skip(2).map(|c| c.abs()).sum()
}
