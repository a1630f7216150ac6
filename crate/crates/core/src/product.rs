//! Approximate multiplication network built from sawtooth compositions.

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::nn::{Layer, NeuralNetwork};

/// Tolerance and range of the product network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSpec {
    delta: f64,
    kappa: f64,
    m: u32,
    /// Exponent of K = 2^k_exp, the half-width of the squaring grid.
    k_exp: i32,
    /// Exponent of the grid spacing h = 2^h_exp.
    h_exp: i32,
}

impl ProductSpec {
    /// Accepts `delta` in (0, 1/2) and `kappa > 0`.
    pub fn new(delta: f64, kappa: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 0.5) {
            return parameter(format!("product tolerance {delta} not in (0, 1/2)"));
        }
        if !(kappa > 0.0 && kappa.is_finite()) {
            return parameter(format!("product range {kappa} must be positive"));
        }
        let kp = kappa.max(1.0);
        let mut k_exp = 1i32;
        while 2f64.powi(k_exp) < 2.0 * kp {
            k_exp += 1;
        }
        let mut h_exp = 0i32;
        while 2f64.powi(h_exp) > 2.0 * delta {
            h_exp -= 1;
        }
        let m = (k_exp - h_exp) as u32;
        Ok(ProductSpec { delta, kappa, m, k_exp, h_exp })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    /// Number of sawtooth levels.
    pub fn levels(&self) -> u32 {
        self.m
    }

    /// Half-width K of the interval on which y²/4 is interpolated.
    pub fn half_width(&self) -> f64 {
        2f64.powi(self.k_exp)
    }

    /// Interpolation grid spacing h in the y variable.
    pub fn spacing(&self) -> f64 {
        2f64.powi(self.h_exp)
    }
}

/// Constants of the depth and size bounds satisfied by [`build_product`]:
/// `L <= c_l log2(max(κ,1)/δ) + c_l_prime`, `M <= c_m log2(max(κ,1)/δ) + c_m_prime`,
/// `M_fi <= c_fi`, `M_la <= c_la`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductConstants {
    pub c_l: f64,
    pub c_l_prime: f64,
    pub c_m: f64,
    pub c_m_prime: f64,
    pub c_fi: f64,
    pub c_la: f64,
}

pub fn product_constants() -> ProductConstants {
    ProductConstants { c_l: 1.0, c_l_prime: 4.0, c_m: 16.0, c_m_prime: 38.0, c_fi: 8.0, c_la: 6.0 }
}

/// Builds the two-input network R with R(a,b) ≈ ab, as φ(a+b) − φ(a−b) where φ
/// interpolates y²/4 on the dyadic grid of spacing h over [−K, K].
pub fn build_product(spec: &ProductSpec) -> NeuralNetwork {
    let m = spec.levels() as usize;
    let k = spec.half_width();
    let mut layers = Vec::with_capacity(m + 2);

    // |u| and |w| via ρ(±u), ρ(±w) with u = a+b, w = a−b
    layers.push(
        Layer::new(
            4,
            2,
            vec![
                (0, 0, 1.0),
                (0, 1, 1.0),
                (1, 0, -1.0),
                (1, 1, -1.0),
                (2, 0, 1.0),
                (2, 1, -1.0),
                (3, 0, -1.0),
                (3, 1, 1.0),
            ],
            vec![0.0; 4],
        )
        .expect("valid layer"),
    );

    // t = |y|/K, x0 = ρ(t), y0 = ρ(t − 1/2); the first hat is g(t) = 2 x0 − 4 y0
    let mut t = Vec::new();
    for br in 0..2 {
        for j in 0..2 {
            t.push((2 * br + j, 2 * br, 1.0 / k));
            t.push((2 * br + j, 2 * br + 1, 1.0 / k));
        }
    }
    layers.push(Layer::new(4, 4, t, vec![0.0, -0.5, 0.0, -0.5]).expect("valid layer"));

    // per branch: x, y carry the sawtooth, A accumulates t − Σ g_s / 4^s
    let mut width = 2usize;
    for s in 1..m {
        let scale = 4f64.powi(s as i32);
        let mut t = Vec::new();
        let mut bias = Vec::new();
        for br in 0..2 {
            let (ix, iy) = (width * br, width * br + 1);
            let o = 3 * br;
            t.push((o, ix, 2.0));
            t.push((o, iy, -4.0));
            t.push((o + 1, ix, 2.0));
            t.push((o + 1, iy, -4.0));
            if s == 1 {
                t.push((o + 2, ix, 1.0 - 2.0 / scale));
                t.push((o + 2, iy, 4.0 / scale));
            } else {
                t.push((o + 2, width * br + 2, 1.0));
                t.push((o + 2, ix, -2.0 / scale));
                t.push((o + 2, iy, 4.0 / scale));
            }
            bias.extend_from_slice(&[0.0, -0.5, 0.0]);
        }
        layers.push(Layer::new(6, 2 * width, t, bias).expect("valid layer"));
        width = 3;
    }

    // (K²/4)(f_m(u) − f_m(w))
    let scale = 4f64.powi(m as i32);
    let c = k * k / 4.0;
    let mut t = Vec::new();
    for (br, sign) in [(0usize, 1.0), (1, -1.0)] {
        let (ix, iy) = (width * br, width * br + 1);
        if width == 2 {
            t.push((0, ix, sign * c * (1.0 - 2.0 / scale)));
        } else {
            t.push((0, width * br + 2, sign * c));
            t.push((0, ix, -sign * c * 2.0 / scale));
        }
        t.push((0, iy, sign * c * 4.0 / scale));
    }
    layers.push(Layer::new(1, 2 * width, t, vec![0.0]).expect("valid layer"));

    NeuralNetwork::new(2, layers).expect("product network layers chain")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parameters() {
        let s = ProductSpec::new(1e-3, 1.0).unwrap();
        assert_eq!(s.half_width(), 2.0);
        assert_eq!(s.spacing(), 2f64.powi(-9));
        assert_eq!(s.levels(), 10);
        let s = ProductSpec::new(0.25, 2.0).unwrap();
        assert_eq!((s.half_width(), s.spacing(), s.levels()), (4.0, 0.5, 3));
        assert!(ProductSpec::new(0.5, 1.0).is_err());
        assert!(ProductSpec::new(0.1, 0.0).is_err());
    }

    #[test]
    fn exact_identities() {
        let net = build_product(&ProductSpec::new(1e-3, 1.0).unwrap());
        assert!((net.realize(&[1.0, 0.37]).unwrap()[0] - 0.37).abs() < 1e-12);
        assert_eq!(net.realize(&[0.93, 0.0]).unwrap()[0], 0.0);
        assert_eq!(net.realize(&[0.0, 0.93]).unwrap()[0], 0.0);
    }

    #[test]
    fn size_formula() {
        for k in 2..12 {
            let s = ProductSpec::new(2f64.powi(-k), 1.0).unwrap();
            let m = build_product(&s).metrics();
            let lv = s.levels() as usize;
            assert_eq!(m.depth, lv + 2);
            assert_eq!(m.size, 16 * lv + 6);
            assert_eq!((m.size_first, m.size_last), (8, 6));
        }
    }
}
