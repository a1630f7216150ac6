//! Continuous piecewise polynomials and their ReLU emulation.

use serde::{Deserialize, Serialize};

use crate::calculus::{concat, identity_net, parallel_many, sparse_concat};
use crate::cheb::{cc_grid, cc_interpolate, cc_points, ChebSeries};
use crate::emulator::{
    build_interval_emulator_with_layout, poly_emulator_bounds, poly_layout, EmulationBudget,
    OutputLayout,
};
use crate::error::{data, parameter, structural, Result};
use crate::nn::{Layer, NeuralNetwork};
use crate::par;
use crate::sobolev::{diff_norms, target_norms, BoundCheck, ErrorReport, NormTag, Target};

/// Relative tolerance of the continuity check at interior nodes.
pub const CONTINUITY_TOL: f64 = 1e-10;

/// Nodes `x_0 < … < x_N` with a polynomial degree per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    nodes: Vec<f64>,
    degrees: Vec<usize>,
}

impl Mesh {
    pub fn new(nodes: Vec<f64>, degrees: Vec<usize>) -> Result<Self> {
        if nodes.len() < 2 {
            return structural("a mesh needs at least two nodes");
        }
        if degrees.len() + 1 != nodes.len() {
            return structural(format!(
                "{} nodes need {} degrees, got {}",
                nodes.len(),
                nodes.len() - 1,
                degrees.len()
            ));
        }
        if nodes.iter().any(|x| !x.is_finite()) {
            return data("non-finite mesh node");
        }
        if let Some(i) = nodes.windows(2).position(|w| !(w[0] < w[1])) {
            return data(format!("mesh nodes {i} and {} are not strictly increasing", i + 1));
        }
        if degrees.contains(&0) {
            return parameter("element degrees must be at least 1");
        }
        Ok(Mesh { nodes, degrees })
    }

    /// Same degree on every element.
    pub fn uniform_degree(nodes: Vec<f64>, p: usize) -> Result<Self> {
        let n = nodes.len().saturating_sub(1);
        Self::new(nodes, vec![p; n])
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    pub fn n_elements(&self) -> usize {
        self.degrees.len()
    }

    /// Element `i` (0-based) as `(x_i, x_{i+1})`.
    pub fn element(&self, i: usize) -> (f64, f64) {
        (self.nodes[i], self.nodes[i + 1])
    }

    pub fn h(&self, i: usize) -> f64 {
        self.nodes[i + 1] - self.nodes[i]
    }

    pub fn h_max(&self) -> f64 {
        (0..self.n_elements()).map(|i| self.h(i)).fold(0.0, f64::max)
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.nodes[0], *self.nodes.last().expect("nonempty"))
    }

    /// Dimension of the spline space, `1 + Σ p_i`.
    pub fn dof(&self) -> usize {
        1 + self.degrees.iter().sum::<usize>()
    }

    /// Index of the element containing `x`, clamped to the first and last element.
    pub fn locate(&self, x: f64) -> usize {
        let n = self.n_elements();
        match self.nodes.partition_point(|&t| t <= x) {
            0 => 0,
            k if k > n => n - 1,
            k => k - 1,
        }
    }

    /// CC points of each element.
    pub fn cc_points(&self) -> Vec<Vec<f64>> {
        (0..self.n_elements())
            .map(|i| {
                let (a, b) = self.element(i);
                cc_points(self.degrees[i], a, b)
            })
            .collect()
    }
}

/// Uniform mesh of `[a, b]` with `n` elements of degree `p`.
pub fn uniform_mesh(a: f64, b: f64, n: usize, p: usize) -> Result<Mesh> {
    if n == 0 {
        return parameter("a mesh needs at least one element");
    }
    let mut nodes: Vec<f64> = (0..=n).map(|i| a + (b - a) * i as f64 / n as f64).collect();
    nodes[n] = b;
    Mesh::uniform_degree(nodes, p)
}

/// A member of S_p(I, T): one series per element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseCheb {
    mesh: Mesh,
    series: Vec<ChebSeries>,
}

impl PiecewiseCheb {
    pub fn new(mesh: Mesh, series: Vec<ChebSeries>) -> Result<Self> {
        if series.len() != mesh.n_elements() {
            return structural(format!(
                "{} elements need {} series, got {}",
                mesh.n_elements(),
                mesh.n_elements(),
                series.len()
            ));
        }
        for (i, s) in series.iter().enumerate() {
            if s.interval() != mesh.element(i) {
                return structural(format!("series {i} lives on the wrong interval"));
            }
            if s.degree() > mesh.degrees[i] {
                return structural(format!(
                    "series {i} has degree {} above the element degree {}",
                    s.degree(),
                    mesh.degrees[i]
                ));
            }
        }
        for i in 0..series.len().saturating_sub(1) {
            let x = mesh.nodes[i + 1];
            check_continuity(i + 1, series[i].eval(x), series[i + 1].eval(x))?;
        }
        Ok(PiecewiseCheb { mesh, series })
    }

    /// Elementwise CC interpolation of samples `values[i][j]` at `mesh.cc_points()[i][j]`.
    pub fn from_element_values(mesh: Mesh, values: &[Vec<f64>]) -> Result<Self> {
        let series = interpolate_elements(&mesh, values)?;
        for i in 0..mesh.n_elements().saturating_sub(1) {
            let right = values[i][0];
            let left = values[i + 1][mesh.degrees[i + 1]];
            check_continuity(i + 1, right, left)?;
        }
        Self::new(mesh, series)
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn series(&self) -> &[ChebSeries] {
        &self.series
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.series[self.mesh.locate(x)].eval(x)
    }

    /// Values at the mesh nodes.
    pub fn nodal_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = (0..self.series.len()).map(|i| self.series[i].eval(self.mesh.nodes[i])).collect();
        let last = self.series.len() - 1;
        v.push(self.series[last].eval(self.mesh.nodes[last + 1]));
        v
    }

    /// Samples at every element's CC points.
    pub fn element_values(&self) -> Vec<Vec<f64>> {
        self.mesh
            .cc_points()
            .iter()
            .zip(&self.series)
            .map(|(pts, s)| pts.iter().map(|&x| s.eval(x)).collect())
            .collect()
    }
}

impl Target for PiecewiseCheb {
    fn value(&self, x: f64) -> f64 {
        self.eval(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.series[self.mesh.locate(x)].derivative().eval(x)
    }
}

fn check_continuity(node: usize, left: f64, right: f64) -> Result<()> {
    let scale = 1f64.max(left.abs()).max(right.abs());
    if (left - right).abs() > CONTINUITY_TOL * scale {
        return data(format!(
            "discontinuity at node {node}: left value {left}, right value {right}"
        ));
    }
    Ok(())
}

fn interpolate_elements(mesh: &Mesh, values: &[Vec<f64>]) -> Result<Vec<ChebSeries>> {
    if values.len() != mesh.n_elements() {
        return structural(format!(
            "{} elements need {} sample vectors, got {}",
            mesh.n_elements(),
            mesh.n_elements(),
            values.len()
        ));
    }
    (0..mesh.n_elements())
        .map(|i| {
            let (a, b) = mesh.element(i);
            cc_interpolate(&values[i], &cc_grid(mesh.degrees[i], a, b)?)
        })
        .collect()
}

/// Elementwise CC interpolant of `f`.
pub fn sample_to_spline(f: &dyn Fn(f64) -> f64, mesh: &Mesh) -> Result<PiecewiseCheb> {
    let pts = mesh.cc_points();
    let mut values = Vec::with_capacity(pts.len());
    for (i, p) in pts.iter().enumerate() {
        let v: Vec<f64> = p.iter().map(|&x| f(x)).collect();
        if let Some(j) = v.iter().position(|y| !y.is_finite()) {
            return data(format!("non-finite sample at element {i}, point {} (x = {})", j, p[j]));
        }
        values.push(v);
    }
    PiecewiseCheb::from_element_values(mesh.clone(), &values)
}

/// Slopes of the nodal interpolant per element.
fn slopes(nodes: &[f64], nodal: &[f64]) -> Vec<f64> {
    (0..nodes.len() - 1).map(|i| (nodal[i + 1] - nodal[i]) / (nodes[i + 1] - nodes[i])).collect()
}

/// Output weights of the nodal-interpolant network: first slope, then slope differences.
fn cpwl_weights(nodes: &[f64], nodal: &[f64]) -> Vec<f64> {
    let s = slopes(nodes, nodal);
    (0..s.len()).map(|i| if i == 0 { s[0] } else { s[i] - s[i - 1] }).collect()
}

fn cpwl_from_nodal(nodes: &[f64], nodal: &[f64]) -> Result<NeuralNetwork> {
    let n = nodes.len() - 1;
    let hidden = Layer::new(n, 1, (0..n).map(|i| (i, 0, 1.0)).collect(), (0..n).map(|i| -nodes[i]).collect())?;
    let w = cpwl_weights(nodes, nodal);
    let out = Layer::new(1, n, w.into_iter().enumerate().map(|(i, v)| (0, i, v)).collect(), vec![nodal[0]])?;
    NeuralNetwork::new(1, vec![hidden, out])
}

/// Depth-2 network realizing the continuous piecewise linear nodal interpolant of `v`.
pub fn cpwl_interpolant_net(v: &PiecewiseCheb) -> Result<NeuralNetwork> {
    cpwl_from_nodal(&v.mesh.nodes, &v.nodal_values())
}

/// Chebyshev coefficients of `v − v̄` per element, from samples at the CC points.
pub fn output_weights_via_ifft(values: &[Vec<f64>], mesh: &Mesh) -> Result<Vec<Vec<f64>>> {
    if values.len() != mesh.n_elements() {
        return structural("one sample vector per element is required");
    }
    let pts = mesh.cc_points();
    let mut out = Vec::with_capacity(values.len());
    for i in 0..mesh.n_elements() {
        let p = mesh.degrees[i];
        if values[i].len() != p + 1 {
            return structural(format!("element {i} expects {} samples, got {}", p + 1, values[i].len()));
        }
        let (a, b) = mesh.element(i);
        let (va, vb) = (values[i][p], values[i][0]);
        let w: Vec<f64> = pts[i]
            .iter()
            .zip(&values[i])
            .map(|(&x, &v)| v - (b - x) / (b - a) * va - (x - a) / (b - a) * vb)
            .collect();
        let c = cc_interpolate(&w, &cc_grid(p, a, b)?)?.coeffs().to_vec();
        let scale = 1f64.max(values[i].iter().fold(0.0f64, |m, v| m.max(v.abs())));
        let sum: f64 = c.iter().sum();
        let alt: f64 = c.iter().enumerate().map(|(l, v)| if l % 2 == 0 { *v } else { -v }).sum();
        if sum.abs() > 1e-10 * scale || alt.abs() > 1e-10 * scale {
            return data(format!("element {i}: endpoint sums {sum:e}, {alt:e} are not zero"));
        }
        out.push(c);
    }
    Ok(out)
}

/// Where each element's coefficients sit in a spline emulator's output layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplineLayout {
    pub mesh: Mesh,
    /// Per element: column offset and layout of its emulator, `None` for linear elements.
    pub elements: Vec<Option<(usize, OutputLayout)>>,
}

impl SplineLayout {
    /// The layout every spline emulator on `mesh` has, whatever the values and tolerance.
    pub fn for_mesh(mesh: &Mesh) -> Self {
        let mut offset = mesh.n_elements();
        let elements = mesh
            .degrees()
            .iter()
            .map(|&p| {
                (p >= 2).then(|| {
                    let layout = poly_layout(p);
                    let at = offset;
                    offset += 2 * layout.mirror.unwrap_or(0);
                    (at, layout)
                })
            })
            .collect();
        SplineLayout { mesh: mesh.clone(), elements }
    }

    /// Number of output-layer columns of a network with this layout.
    pub fn width(&self) -> usize {
        self.elements
            .iter()
            .flatten()
            .map(|(_, l)| 2 * l.mirror.unwrap_or(0))
            .sum::<usize>()
            + self.mesh.n_elements()
    }

    /// Rebuilds the spline from the output layer of a network with this layout.
    pub fn read(&self, net: &NeuralNetwork) -> Result<PiecewiseCheb> {
        let mesh = &self.mesh;
        let n = mesh.n_elements();
        let out = net.last_layer();
        if out.rows() != 1 || net.input_dim() != 1 {
            return structural("spline networks are scalar");
        }
        if out.cols() != self.width() {
            return structural(format!(
                "output layer has {} columns, the mesh layout needs {}",
                out.cols(),
                self.width()
            ));
        }
        let mut w = Vec::with_capacity(n);
        for el in &self.elements {
            w.push(match el {
                None => None,
                Some((off, layout)) => {
                    let mut c = layout.read(out, 0, *off)?;
                    c[0] = -c[1..].iter().sum::<f64>();
                    Some(c)
                }
            });
        }
        let c0: f64 = w.iter().flatten().map(|c| c[0]).sum();
        let v0 = out.bias()[0] - c0;
        let mut slope = 0.0;
        let mut nodal = vec![v0];
        for i in 0..n {
            slope += out.weight(0, i);
            nodal.push(nodal[i] + slope * mesh.h(i));
        }
        let series = (0..n)
            .map(|i| {
                let (a, b) = mesh.element(i);
                let mut c = w[i].clone().unwrap_or_else(|| vec![0.0; 2]);
                c.resize(c.len().max(2), 0.0);
                c[0] += 0.5 * (nodal[i] + nodal[i + 1]);
                c[1] += 0.5 * (nodal[i + 1] - nodal[i]);
                ChebSeries::new(c, a, b)
            })
            .collect::<Result<Vec<_>>>()?;
        PiecewiseCheb::new(mesh.clone(), series)
    }
}

/// Φ^{v,T,p}_ε.
pub fn build_spline_emulator(v: &PiecewiseCheb, eps: f64) -> Result<NeuralNetwork> {
    Ok(build_spline_emulator_with_layout(v, eps)?.0)
}

pub fn build_spline_emulator_with_layout(
    v: &PiecewiseCheb,
    eps: f64,
) -> Result<(NeuralNetwork, SplineLayout)> {
    if !(eps > 0.0 && eps < 1.0) {
        return parameter(format!("eps = {eps} not in (0, 1)"));
    }
    let mesh = &v.mesh;
    let n = mesh.n_elements();
    let what = output_weights_via_ifft(&v.element_values(), mesh)?;
    let linear = cpwl_interpolant_net(v)?;
    let idx: Vec<usize> = (0..n).filter(|&i| mesh.degrees[i] >= 2).collect();
    let pieces: Vec<(NeuralNetwork, OutputLayout)> = par::map(&idx, |&i| {
        let (a, b) = mesh.element(i);
        let s = ChebSeries::new(what[i].clone(), a, b)?;
        build_interval_emulator_with_layout(&[s], eps / 4.0)
    })
    .into_iter()
    .collect::<Result<_>>()?;

    let top = pieces.iter().map(|p| p.0.depth()).fold(linear.depth(), usize::max);
    let mut nets = vec![sparse_concat(&linear, &identity_net(1, top + 1 - linear.depth())?)?];
    for (net, _) in &pieces {
        nets.push(sparse_concat(net, &identity_net(1, top + 1 - net.depth())?)?);
    }
    let stacked = parallel_many(&nets)?;
    let k = stacked.output_dim();
    let sum = NeuralNetwork::affine(Layer::new(1, k, (0..k).map(|j| (0, j, 1.0)).collect(), vec![0.0])?);
    let net = concat(&sum, &stacked)?;
    let layout = SplineLayout::for_mesh(mesh);
    debug_assert_eq!(net.last_layer().cols(), layout.width());
    Ok((net, layout))
}

/// Right-hand sides of the spline emulator's depth and size inequalities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplineBounds {
    pub depth: f64,
    pub size: f64,
    pub size_first: f64,
    pub size_last: f64,
}

pub fn spline_bounds(mesh: &Mesh, eps: f64) -> SplineBounds {
    let n = mesh.n_elements() as f64;
    let psum: usize = mesh.degrees.iter().sum();
    let mut piece_depth: f64 = 2.0;
    let mut piece_sizes = Vec::new();
    for &p in mesh.degrees.iter().filter(|&&p| p >= 2) {
        let tau = EmulationBudget::for_interval(eps / 4.0, p).map(|b| b.delta).unwrap_or(f64::NAN);
        let b = poly_emulator_bounds(p, p + 1, tau);
        piece_depth = piece_depth.max(b.depth + 2.0);
        piece_sizes.push(b.size + b.size_first + 3.0 + 7.0);
    }
    let pad = piece_depth;
    let mut size = (3.0 * n + 1.0) + 2.0 * n + 2.0 + 2.0 * pad;
    for s in &piece_sizes {
        size += s + 4.0 + 2.0 + 2.0 * pad;
    }
    SplineBounds {
        depth: piece_depth + 1.0,
        size,
        size_first: 2.0 * n + 2.0,
        size_last: 3.0 * n + 1.0 + 2.0 * psum as f64,
    }
}

/// Structural and accuracy ledger of a spline emulator, with H¹, L² and W^{1,∞} measurements.
pub fn spline_report(v: &PiecewiseCheb, net: &NeuralNetwork, eps: f64) -> Result<ErrorReport> {
    let mesh = &v.mesh;
    let mut report = diff_norms(v, net, mesh, &NormTag::ALL)?;
    let vn = target_norms(v, mesh, &[NormTag::W11, NormTag::H1Semi, NormTag::W1Inf])?;
    let m = net.metrics();
    let b = spline_bounds(mesh, eps);
    report.check(BoundCheck::exact("depth", m.depth as f64, b.depth));
    report.check(BoundCheck::exact("size", m.size as f64, b.size));
    report.check(BoundCheck::exact("size_first <= 2N+2", m.size_first as f64, b.size_first));
    report.check(BoundCheck::exact("size_last <= 3N+1+2 sum p", m.size_last as f64, b.size_last));
    for (tag, name) in [(NormTag::W11, "W1_1"), (NormTag::H1Semi, "H1_semi"), (NormTag::W1Inf, "W1_inf")] {
        let lhs = report.get(tag).unwrap_or(0.0);
        let rhs = 0.5 * eps * vn.get(tag).unwrap_or(0.0);
        report.check(BoundCheck::measured(format!("|v - R|_{name} <= eps/2 |v|_{name}"), lhs, rhs));
    }
    let nodal = v.nodal_values();
    let at_nodes = net.realize_batch(mesh.nodes())?;
    let gap = nodal.iter().zip(&at_nodes).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    let scale = nodal.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    report.check(BoundCheck::exact("nodal exactness", gap, 1e-12 * scale));
    Ok(report)
}

/// Certificate of the fractional-order bound from measured L^r and W^{1,r} errors.
pub fn fractional_bound_report(
    v: &PiecewiseCheb,
    net: &NeuralNetwork,
    s: f64,
    r: NormTag,
    eps: f64,
) -> Result<ErrorReport> {
    if !(s > 0.0 && s < 1.0) {
        return parameter(format!("s = {s} not in (0, 1)"));
    }
    let (lr, semi) = match r {
        NormTag::L1 | NormTag::W11 => (NormTag::L1, NormTag::W11),
        NormTag::L2 | NormTag::H1Semi => (NormTag::L2, NormTag::H1Semi),
        NormTag::Linf | NormTag::W1Inf => (NormTag::Linf, NormTag::W1Inf),
    };
    let mesh = &v.mesh;
    let mut report = diff_norms(v, net, mesh, &[lr, semi])?;
    let e_l = report.get(lr).unwrap_or(0.0);
    let e_semi = report.get(semi).unwrap_or(0.0);
    let e_w = match lr {
        NormTag::L1 => e_l + e_semi,
        NormTag::L2 => e_l.hypot(e_semi),
        _ => e_l.max(e_semi),
    };
    let vsemi = target_norms(v, mesh, &[semi])?.get(semi).unwrap_or(0.0);
    let certificate = e_l.powf(1.0 - s) * e_w.powf(s);
    let bound = mesh.h_max().powf(1.0 - s) * eps * vsemi;
    report.check(BoundCheck::measured(
        format!("fractional s={s}: e_L^(1-s) e_W^s <= h^(1-s) eps |v|_W1"),
        certificate,
        bound,
    ));
    Ok(report)
}

/// `e_L^{1−s} · e_W^s`.
pub fn fractional_certificate(e_l: f64, e_w: f64, s: f64) -> f64 {
    e_l.powf(1.0 - s) * e_w.powf(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hat_function() {
        let mesh = Mesh::new(vec![0.0, 0.5, 1.0], vec![1, 1]).unwrap();
        let v = sample_to_spline(&|x: f64| 0.5 - (x - 0.5).abs(), &mesh).unwrap();
        let net = cpwl_interpolant_net(&v).unwrap();
        assert!((net.realize(&[0.25]).unwrap()[0] - 0.25).abs() < 1e-15);
        let m = net.metrics();
        assert!(m.size <= 7 && m.size_first <= 4 && m.size_last <= 3);
        assert_eq!(net.last_layer().weight(0, 0), 1.0);
    }

    #[test]
    fn mesh_validation() {
        assert!(Mesh::new(vec![0.0, 1.0], vec![1, 2]).is_err());
        assert!(Mesh::new(vec![0.0, 0.0], vec![1]).is_err());
        assert!(Mesh::new(vec![0.0, 1.0], vec![0]).is_err());
        let m = Mesh::new(vec![0.0, 0.5, 1.0], vec![2, 3]).unwrap();
        assert_eq!(m.dof(), 6);
        assert_eq!((m.locate(-1.0), m.locate(0.25), m.locate(0.5), m.locate(2.0)), (0, 0, 1, 1));
    }

    #[test]
    fn discontinuity_is_rejected() {
        let mesh = Mesh::new(vec![0.0, 1.0, 2.0], vec![1, 1]).unwrap();
        let vals = vec![vec![1.0, 0.0], vec![2.0, 1.5]];
        assert!(matches!(PiecewiseCheb::from_element_values(mesh, &vals), Err(crate::Error::Data(_))));
    }

    #[test]
    fn linear_element_has_zero_weights() {
        let mesh = Mesh::new(vec![0.0, 1.0], vec![4]).unwrap();
        let v = sample_to_spline(&|x: f64| 3.0 * x - 1.0, &mesh).unwrap();
        let w = output_weights_via_ifft(&v.element_values(), &mesh).unwrap();
        assert!(w[0].iter().all(|c| c.abs() < 1e-15));
    }
}
