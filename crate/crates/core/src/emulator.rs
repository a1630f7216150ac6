//! Chebyshev tower Ψ^k_δ, multi-polynomial emulator Φ^v_τ and the clamped interval emulator.

use serde::{Deserialize, Serialize};

use crate::calculus::{concat, full_parallel_many, identity_net, parallel_many, sparse_concat};
use crate::cheb::ChebSeries;
use crate::error::{parameter, structural, Result};
use crate::nn::{Layer, NeuralNetwork};
use crate::product::{build_product, product_constants, ProductSpec};

/// Constant in `τ = ε / (4 C₀ n⁶)`; bounds `((r'+1) n²)^{1/r'} / n²` for all `r' ≥ 1`.
pub const C0: f64 = 2.0;

/// Tolerances used when emulating polynomials of degree `n` to accuracy `tau_or_eps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmulationBudget {
    pub tau_or_eps: f64,
    pub n: usize,
    pub k: u32,
    pub delta: f64,
}

impl EmulationBudget {
    /// Budget of the interval emulator: `δ = τ = ε / (4 C₀ n⁶)`.
    pub fn for_interval(eps: f64, n: usize) -> Result<Self> {
        check_unit(eps, "eps")?;
        if n == 0 {
            return parameter("degree must be at least 1");
        }
        let tau = eps / (4.0 * C0 * (n as f64).powi(6));
        Ok(EmulationBudget { tau_or_eps: eps, n, k: tower_level(n), delta: tau })
    }

    /// Per-level product tolerances, from the top level `k` down to level 1.
    pub fn theta_schedule(&self) -> Vec<f64> {
        theta_schedule(self.k, self.delta)
    }
}

/// `⌈log₂ n⌉` (0 for n ≤ 1).
pub fn tower_level(n: usize) -> u32 {
    if n <= 1 {
        0
    } else {
        usize::BITS - (n - 1).leading_zeros()
    }
}

/// Tolerances δ_k, δ_{k−1}, …, δ_1 with δ_{j} = 2^{−2j−4} δ_{j+1}.
pub fn theta_schedule(k: u32, delta: f64) -> Vec<f64> {
    let mut out = vec![delta];
    for j in (1..k).rev() {
        let prev = *out.last().expect("nonempty");
        out.push(prev * 2f64.powi(-2 * j as i32 - 4));
    }
    out
}

fn check_unit(x: f64, name: &str) -> Result<()> {
    if !(x > 0.0 && x < 1.0) {
        return parameter(format!("{name} = {x} not in (0, 1)"));
    }
    Ok(())
}

/// Ψ^k_δ with outputs `(x, T̃_{2^{k−1}}, …, T̃_{2^k})`.
pub fn build_cheb_tower(k: u32, delta: f64) -> Result<NeuralNetwork> {
    if k == 0 {
        return parameter("tower level must be at least 1");
    }
    check_unit(delta, "delta")?;
    if k == 1 {
        return tower_base(delta);
    }
    let kk = k - 1;
    let theta = delta * 2f64.powi(-2 * kk as i32 - 4);
    let lower = build_cheb_tower(kk, theta)?;
    let routed = sparse_concat(&routing(kk)?, &lower)?;
    sparse_concat(&doubling_stage(kk, theta)?, &routed)
}

fn tower_base(delta: f64) -> Result<NeuralNetwork> {
    let prod = build_product(&ProductSpec::new(delta / 4.0, 1.0)?);
    let diag = NeuralNetwork::affine(Layer::new(2, 1, vec![(0, 0, 1.0), (1, 0, 1.0)], vec![0.0; 2])?);
    let twice = NeuralNetwork::affine(Layer::new(1, 1, vec![(0, 0, 2.0)], vec![-1.0])?);
    let square = concat(&twice, &concat(&prod, &diag)?)?;
    let id = identity_net(1, square.depth())?;
    parallel_many(&[id.clone(), id, square])
}

/// Φ^{1,k}: copies `(z_1, z_{2^{k−1}+2}, z_2, z_3, z_3, z_3, z_3, z_4, …)`.
fn routing(k: u32) -> Result<NeuralNetwork> {
    let half = 1usize << (k - 1);
    let rows = (1usize << (k + 1)) + 2;
    let mut t = vec![(0, 0, 1.0), (1, half + 1, 1.0)];
    for m in 3..=rows {
        t.push((m - 1, (m + 5).div_ceil(4) - 1, 1.0));
    }
    Ok(NeuralNetwork::affine(Layer::new(rows, half + 2, t, vec![0.0; rows])?))
}

/// Φ^{2,k}_δ = (A^{2,k}, b^{2,k}) ⊙ FP(Id_{2,L_θ}, ×̃_{θ,2}, …, ×̃_{θ,2}).
fn doubling_stage(k: u32, theta: f64) -> Result<NeuralNetwork> {
    let prod = build_product(&ProductSpec::new(theta, 2.0)?);
    let n = 1usize << k;
    let mut parts = vec![identity_net(2, prod.depth())?];
    parts.extend(std::iter::repeat_n(prod, n));
    let fp = full_parallel_many(&parts)?;
    let rows = n + 2;
    let mut t = vec![(0, 0, 1.0), (1, 1, 1.0)];
    let mut bias = vec![0.0; rows];
    for m in 3..=rows {
        t.push((m - 1, m - 1, 2.0));
        if m % 2 == 1 {
            t.push((m - 1, 0, -1.0));
        } else {
            bias[m - 1] = -1.0;
        }
    }
    let combine = NeuralNetwork::affine(Layer::new(rows, rows, t, bias)?);
    sparse_concat(&combine, &fp)
}

/// Right-hand sides of the tower's depth and size inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TowerBounds {
    pub depth: f64,
    pub size: f64,
    pub size_first: f64,
    pub size_last: f64,
}

pub fn tower_bounds(k: u32, delta: f64) -> TowerBounds {
    let c = product_constants();
    let kf = k as f64;
    let lg = (1.0 / delta).log2();
    let c1 = 9.0 * c.c_m + c.c_m_prime + c.c_fi + c.c_la + 14.0;
    let c2 = 20.0 * c.c_l + 4.0 * c.c_l_prime + c.c_la + 24.0;
    let p2k = 2f64.powi(k as i32);
    TowerBounds {
        depth: c.c_l * (2.0 / 3.0 * kf.powi(3) + 3.0 * kf * kf + kf * lg)
            + (5.0 * c.c_l + c.c_l_prime + 2.0) * kf,
        size: 4.0 * c.c_m * kf * p2k
            + c.c_m * p2k * lg
            + 4.0 * kf * c.c_l * lg
            + c1 * p2k
            + 8.0 / 3.0 * c.c_l * kf.powi(3)
            + 12.0 * c.c_l * kf * kf
            + c2 * kf,
        size_first: c.c_fi + 4.0,
        size_last: 2.0 * p2k + c.c_la + 4.0,
    }
}

/// Where the coefficients of each emulated polynomial sit in the output layer.
///
/// Row `i` of the output layer carries polynomial `i`: its bias is `v_{i,0}` and
/// column `columns[ℓ−1]` carries `v_{i,ℓ}`. When `mirror` is set, column
/// `columns[ℓ−1] + mirror` carries `−v_{i,ℓ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputLayout {
    pub degree: usize,
    pub columns: Vec<usize>,
    pub mirror: Option<usize>,
}

impl OutputLayout {
    /// Reads the coefficients of polynomial `row` from an output layer.
    pub fn read(&self, layer: &Layer, row: usize, col_offset: usize) -> Result<Vec<f64>> {
        let mut v = vec![layer.bias()[row]];
        for &c in &self.columns {
            let w = layer.weight(row, c + col_offset);
            if let Some(d) = self.mirror {
                let neg = layer.weight(row, c + d + col_offset);
                if neg != -w {
                    return structural(format!(
                        "output weights at columns {} and {} are not mirrored",
                        c + col_offset,
                        c + d + col_offset
                    ));
                }
            }
            v.push(w);
        }
        Ok(v)
    }
}

fn max_degree(polys: &[ChebSeries]) -> Result<usize> {
    if polys.is_empty() {
        return structural("at least one polynomial is required");
    }
    Ok(polys.iter().map(ChebSeries::degree).max().unwrap_or(0))
}

/// Φ^v_τ for series on (−1, 1).
pub fn build_poly_emulator(polys: &[ChebSeries], tau: f64) -> Result<NeuralNetwork> {
    Ok(build_poly_emulator_with_layout(polys, tau)?.0)
}

/// Φ^v_τ together with its output layout.
pub fn build_poly_emulator_with_layout(
    polys: &[ChebSeries],
    tau: f64,
) -> Result<(NeuralNetwork, OutputLayout)> {
    check_unit(tau, "tau")?;
    let n = max_degree(polys)?;
    for p in polys {
        if p.interval() != (-1.0, 1.0) {
            return parameter("the polynomial emulator expects series on (-1, 1)");
        }
    }
    let coeff = |i: usize, l: usize| polys[i].coeffs().get(l).copied().unwrap_or(0.0);
    let nv = polys.len();
    if n <= 1 {
        let t = (0..nv).map(|i| (i, 0, coeff(i, 1))).collect();
        let bias = (0..nv).map(|i| coeff(i, 0)).collect();
        let net = NeuralNetwork::affine(Layer::new(nv, 1, t, bias)?);
        return Ok((net, OutputLayout { degree: n, columns: vec![0], mirror: None }));
    }
    let (hidden, width, channels) = poly_skeleton(n, tau)?;
    let mut t = Vec::new();
    for i in 0..nv {
        for l in 1..=n {
            t.push((i, channels[l - 1], coeff(i, l)));
        }
    }
    let bias = (0..nv).map(|i| coeff(i, 0)).collect();
    let out = NeuralNetwork::affine(Layer::new(nv, width, t, bias)?);
    let net = sparse_concat(&out, &hidden)?;
    Ok((net, OutputLayout { degree: n, columns: channels, mirror: Some(width) }))
}

/// `P(Ψ^j_τ ⊙ Id_{1,ℓ_j})` and the channel of `T̃_ℓ` for `ℓ = 1..=n`.
fn poly_skeleton(n: usize, tau: f64) -> Result<(NeuralNetwork, usize, Vec<usize>)> {
    let k = tower_level(n);
    let towers: Vec<NeuralNetwork> =
        (1..=k).map(|j| build_cheb_tower(j, tau)).collect::<Result<_>>()?;
    let top = towers.last().expect("k >= 1").depth();
    let parts: Vec<NeuralNetwork> = towers
        .iter()
        .map(|t| sparse_concat(t, &identity_net(1, top + 1 - t.depth())?))
        .collect::<Result<_>>()?;
    let hidden = parallel_many(&parts)?;
    let layout = poly_layout(n);
    Ok((hidden, layout.mirror.unwrap_or(0), layout.columns))
}

/// Output layout of the emulator of degree `n ≥ 2`, which depends on `n` only.
pub fn poly_layout(n: usize) -> OutputLayout {
    let k = tower_level(n);
    let width = (1usize << k) + 2 * k as usize - 1;
    let columns = (1..=n)
        .map(|l| match l {
            1 => 1,
            2 => 2,
            _ => {
                let j = tower_level(l) as usize;
                l + 2 * j - 2
            }
        })
        .collect();
    OutputLayout { degree: n, columns, mirror: Some(width) }
}

/// Right-hand sides of the poly emulator's structural inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PolyBounds {
    pub depth: f64,
    pub size: f64,
    pub size_first: f64,
    pub size_last: f64,
}

/// Bounds for `n ≥ 2` and `c_n` nonzero coefficients in total.
pub fn poly_emulator_bounds(n: usize, c_n: usize, tau: f64) -> PolyBounds {
    let c = product_constants();
    let k = tower_level(n).max(1);
    let cn = c_n as f64;
    let top = tower_bounds(k, tau);
    let mut size = 2.0 * cn;
    for j in 1..=k {
        let b = tower_bounds(j, tau);
        size += b.size_last + b.size + (c.c_fi + 4.0) + 2.0 + 2.0 * top.depth;
    }
    PolyBounds {
        depth: 2.0 + top.depth,
        size,
        size_first: 4.0 * k as f64,
        size_last: 2.0 * cn,
    }
}

/// Φ^{v,I}_ε for series sharing one interval `(a, b)`: clamps to the interval, then emulates.
pub fn build_interval_emulator(polys: &[ChebSeries], eps: f64) -> Result<NeuralNetwork> {
    Ok(build_interval_emulator_with_layout(polys, eps)?.0)
}

pub fn build_interval_emulator_with_layout(
    polys: &[ChebSeries],
    eps: f64,
) -> Result<(NeuralNetwork, OutputLayout)> {
    check_unit(eps, "eps")?;
    let n = max_degree(polys)?;
    let (a, b) = polys[0].interval();
    if polys.iter().any(|p| p.interval() != (a, b)) {
        return parameter("all polynomials must share one interval");
    }
    let reference: Vec<ChebSeries> =
        polys.iter().map(|p| p.with_interval(-1.0, 1.0)).collect::<Result<_>>()?;
    let tau = EmulationBudget::for_interval(eps, n.max(1))?.delta;
    let (inner, layout) = build_poly_emulator_with_layout(&reference, tau)?;
    let net = sparse_concat(&inner, &clamp_net(a, b)?)?;
    let layout = match layout.mirror {
        Some(_) => layout,
        None => OutputLayout { mirror: Some(1), ..layout },
    };
    Ok((net, layout))
}

/// Φ^P, realizing `min(max(2(x − (a+b)/2)/(b − a), −1), 1)`.
pub fn clamp_net(a: f64, b: f64) -> Result<NeuralNetwork> {
    if !(a < b) {
        return parameter(format!("interval ({a}, {b}) needs a < b"));
    }
    let s = 2.0 / (b - a);
    NeuralNetwork::new(
        1,
        vec![
            Layer::new(2, 1, vec![(0, 0, 1.0), (1, 0, 1.0)], vec![-a, -b])?,
            Layer::new(1, 2, vec![(0, 0, s), (0, 1, -s)], vec![-1.0])?,
        ],
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn levels() {
        assert_eq!(tower_level(1), 0);
        assert_eq!(tower_level(2), 1);
        assert_eq!(tower_level(3), 2);
        assert_eq!(tower_level(4), 2);
        assert_eq!(tower_level(5), 3);
        assert_eq!(tower_level(64), 6);
    }

    #[test]
    fn tower_shapes() {
        for k in 1..=4 {
            let t = build_cheb_tower(k, 1e-2).unwrap();
            assert_eq!(t.output_dim(), (1 << (k - 1)) + 2);
            let out = t.realize(&[0.3]).unwrap();
            assert_eq!(out[0], 0.3);
        }
    }

    #[test]
    fn clamp() {
        let p = clamp_net(0.0, 1.0).unwrap();
        assert_eq!(p.realize(&[-0.5]).unwrap()[0], -1.0);
        assert_eq!(p.realize(&[0.5]).unwrap()[0], 0.0);
        assert_eq!(p.realize(&[2.0]).unwrap()[0], 1.0);
    }

    #[test]
    fn affine_and_constant_paths() {
        let t1 = ChebSeries::reference(vec![0.0, 1.0]).unwrap();
        let net = build_poly_emulator(&[t1], 1e-3).unwrap();
        assert_eq!(net.depth(), 1);
        assert_eq!(net.realize(&[0.25]).unwrap()[0], 0.25);
        let one = ChebSeries::reference(vec![1.0, 0.0, 0.0]).unwrap();
        let net = build_poly_emulator(&[one], 1e-3).unwrap();
        for x in [-1.0, -0.3, 0.7, 1.0] {
            assert_eq!(net.realize(&[x]).unwrap()[0], 1.0);
        }
    }

    #[test]
    fn channel_map() {
        let polys: Vec<ChebSeries> = (1..=8)
            .map(|l| {
                let mut c = vec![0.0; 9];
                c[l] = 1.0;
                ChebSeries::reference(c).unwrap()
            })
            .collect();
        let (net, layout) = build_poly_emulator_with_layout(&polys, 1e-3).unwrap();
        assert_eq!(layout.columns, vec![1, 2, 5, 6, 9, 10, 11, 12]);
        for (i, p) in polys.iter().enumerate() {
            assert_eq!(layout.read(net.last_layer(), i, 0).unwrap(), p.coeffs());
        }
    }
}
