//! L^r and W^{1,r} error measurement between targets and network realizations.

use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use serde::{Deserialize, Serialize};

use crate::error::{data, parameter, Result};
use crate::nn::{NeuralNetwork, SizeMetrics};
use crate::spline::Mesh;

/// Gauss–Legendre nodes per panel.
pub const GL_NODES: usize = 16;
/// Panels per mesh element.
pub const PANELS: usize = 64;
/// Grid points per element for sup-norms.
pub const GRID: usize = 8193;
/// Geometric refinement levels toward a declared singular point.
pub const GRADED_LEVELS: usize = 40;
/// Relative slack applied to every measured `≤` bound.
pub const SLACK: f64 = 1e-3;
/// Fractional offset of derivative sample points inside grid cells.
pub const GRID_OFFSET: f64 = 0.381_966_011_250_105_1;

/// A scalar function with a derivative.
pub trait Target: Sync {
    fn value(&self, x: f64) -> f64;
    fn derivative(&self, x: f64) -> f64;
}

/// Target given by a pair of closures.
pub struct FnTarget<F, D> {
    pub f: F,
    pub df: D,
}

impl<F, D> FnTarget<F, D>
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    pub fn new(f: F, df: D) -> Self {
        FnTarget { f, df }
    }
}

impl<F, D> Target for FnTarget<F, D>
where
    F: Fn(f64) -> f64 + Sync,
    D: Fn(f64) -> f64 + Sync,
{
    fn value(&self, x: f64) -> f64 {
        (self.f)(x)
    }
    fn derivative(&self, x: f64) -> f64 {
        (self.df)(x)
    }
}

/// `x ↦ x^α`.
pub struct Power(pub f64);

impl Target for Power {
    fn value(&self, x: f64) -> f64 {
        x.powf(self.0)
    }
    fn derivative(&self, x: f64) -> f64 {
        self.0 * x.powf(self.0 - 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum NormTag {
    L1,
    L2,
    Linf,
    #[serde(rename = "W1_1")]
    W11,
    #[serde(rename = "H1_semi")]
    H1Semi,
    #[serde(rename = "W1_inf")]
    W1Inf,
}

impl NormTag {
    pub const ALL: [NormTag; 6] =
        [NormTag::L1, NormTag::L2, NormTag::Linf, NormTag::W11, NormTag::H1Semi, NormTag::W1Inf];

    fn is_grid(self) -> bool {
        matches!(self, NormTag::Linf | NormTag::W1Inf)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Quadrature,
    Grid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormEntry {
    pub tag: NormTag,
    pub value: f64,
    pub method: Method,
    /// Sample points per element.
    pub resolution: usize,
    /// Grid sup-norms only bound the true value from below.
    pub lower_estimate: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub lhs: f64,
    pub rhs: f64,
    pub satisfied: bool,
}

impl BoundCheck {
    /// Measured inequality `lhs ≤ rhs·(1 + SLACK)`.
    pub fn measured(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        BoundCheck { name: name.into(), lhs, rhs, satisfied: lhs <= rhs * (1.0 + SLACK) }
    }

    /// Exact inequality `lhs ≤ rhs`, used for integer counts.
    pub fn exact(name: impl Into<String>, lhs: f64, rhs: f64) -> Self {
        BoundCheck { name: name.into(), lhs, rhs, satisfied: lhs <= rhs }
    }
}

/// Norms per element and over the whole mesh, plus a ledger of checked bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ErrorReport {
    pub entries: Vec<NormEntry>,
    /// `elements[i]` lists `(tag, value)` on element `i`.
    pub elements: Vec<Vec<(NormTag, f64)>>,
    pub metrics: Option<SizeMetrics>,
    pub bound_checks: Vec<BoundCheck>,
    pub warnings: Vec<String>,
}

impl ErrorReport {
    pub fn get(&self, tag: NormTag) -> Option<f64> {
        self.entries.iter().find(|e| e.tag == tag).map(|e| e.value)
    }

    pub fn element(&self, i: usize, tag: NormTag) -> Option<f64> {
        self.elements.get(i)?.iter().find(|e| e.0 == tag).map(|e| e.1)
    }

    /// `sqrt(‖e‖²_{L²} + |e|²_{H¹})` when both are present.
    pub fn h1_norm(&self) -> Option<f64> {
        Some(self.get(NormTag::L2)?.hypot(self.get(NormTag::H1Semi)?))
    }

    pub fn check(&mut self, c: BoundCheck) {
        self.bound_checks.push(c);
    }

    pub fn all_satisfied(&self) -> bool {
        self.bound_checks.iter().all(|c| c.satisfied)
    }
}

fn gl() -> &'static [(f64, f64)] {
    static RULE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(GL_NODES).expect("16 nodes is a valid rule").as_node_weight_pairs().to_vec()
    })
}

/// Quadrature nodes and weights on `[a, b]` split into `panels` equal panels.
fn panel_rule(a: f64, b: f64, panels: usize, out: &mut Vec<(f64, f64)>) {
    let h = (b - a) / panels as f64;
    for p in 0..panels {
        let (lo, hi) = (a + p as f64 * h, if p + 1 == panels { b } else { a + (p + 1) as f64 * h });
        push_gl(lo, hi, out);
    }
}

fn push_gl(lo: f64, hi: f64, out: &mut Vec<(f64, f64)>) {
    let (m, r) = (0.5 * (lo + hi), 0.5 * (hi - lo));
    for &(x, w) in gl() {
        out.push((m + r * x, r * w));
    }
}

/// Rule on `[a, b]` graded toward `a`: panels `[a + h 2^{−j−1}, a + h 2^{−j}]` and an
/// innermost panel under the substitution `x = a + ε s^q`.
fn graded_rule(a: f64, b: f64, q: u32, out: &mut Vec<(f64, f64)>) {
    let h = b - a;
    for j in 0..GRADED_LEVELS {
        let hi = a + h * 2f64.powi(-(j as i32));
        let lo = a + h * 2f64.powi(-(j as i32) - 1);
        push_gl(lo, hi, out);
    }
    let eps = h * 2f64.powi(-(GRADED_LEVELS as i32));
    let qf = q as f64;
    for &(s, w) in gl() {
        let s = 0.5 * (s + 1.0);
        out.push((a + eps * s.powf(qf), 0.5 * w * eps * qf * s.powf(qf - 1.0)));
    }
}

/// Options controlling a measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Resolution {
    pub panels: usize,
    pub grid: usize,
    /// Exponent α of a singularity `x^α` at the left end of the first element.
    pub singular: Option<f64>,
}

impl Default for Resolution {
    fn default() -> Self {
        Resolution { panels: PANELS, grid: GRID, singular: None }
    }
}

/// Norms of `f − R(net)` over the mesh elements.
pub fn diff_norms(
    f: &dyn Target,
    net: &NeuralNetwork,
    mesh: &Mesh,
    norms: &[NormTag],
) -> Result<ErrorReport> {
    measure(f, Some(net), mesh, norms, Resolution::default())
}

/// Norms of `f` itself.
pub fn target_norms(f: &dyn Target, mesh: &Mesh, norms: &[NormTag]) -> Result<ErrorReport> {
    measure(f, None, mesh, norms, Resolution::default())
}

/// Norms of `x^α − R(net)` with graded quadrature toward the left end of the mesh.
pub fn singular_diff_norms(alpha: f64, net: &NeuralNetwork, mesh: &Mesh) -> Result<ErrorReport> {
    singular_diff_norms_for(&Power(alpha), alpha, Some(net), mesh, &NormTag::ALL)
}

/// Graded measurement for a general target with an `x^α`-type singularity at the left end.
pub fn singular_diff_norms_for(
    f: &dyn Target,
    alpha: f64,
    net: Option<&NeuralNetwork>,
    mesh: &Mesh,
    norms: &[NormTag],
) -> Result<ErrorReport> {
    if !(alpha > 0.0) {
        return parameter(format!("singularity exponent {alpha} must be positive"));
    }
    let res = Resolution { singular: Some(alpha), ..Resolution::default() };
    measure(f, net, mesh, norms, res)
}

/// Norms of `R(a) − R(b)` for two scalar networks.
pub fn net_diff_norms(
    a: &NeuralNetwork,
    b: &NeuralNetwork,
    mesh: &Mesh,
    norms: &[NormTag],
) -> Result<ErrorReport> {
    if a.input_dim() != 1 || a.output_dim() != 1 {
        return crate::error::structural("norms need a scalar network");
    }
    let eval = |xs: &[f64], _: bool| a.realize_scalar_batch_with_derivative(xs);
    measure_with(&eval, Some(b), mesh, norms, Resolution::default())
}

type Sampler<'a> = dyn Fn(&[f64], bool) -> Result<(Vec<f64>, Vec<f64>)> + 'a;

/// General entry point.
pub fn measure(
    f: &dyn Target,
    net: Option<&NeuralNetwork>,
    mesh: &Mesh,
    norms: &[NormTag],
    res: Resolution,
) -> Result<ErrorReport> {
    let eval = |xs: &[f64], deriv: bool| sample_target(f, xs, deriv);
    measure_with(&eval, net, mesh, norms, res)
}

fn measure_with(
    f: &Sampler,
    net: Option<&NeuralNetwork>,
    mesh: &Mesh,
    norms: &[NormTag],
    res: Resolution,
) -> Result<ErrorReport> {
    if let Some(n) = net {
        if n.input_dim() != 1 || n.output_dim() != 1 {
            return crate::error::structural("norms need a scalar network");
        }
    }
    let ne = mesh.n_elements();
    let want = |t: NormTag| norms.contains(&t);
    let quad = norms.iter().any(|t| !t.is_grid());
    let mut report = ErrorReport { elements: vec![Vec::new(); ne], ..Default::default() };

    let q_exp = res.singular.map(|a| {
        if a <= 0.5 {
            report.warnings.push(format!(
                "exponent {a} <= 1/2: the H1 seminorm of the target diverges near the singular point"
            ));
            1
        } else {
            (1.0 / (2.0 * a - 1.0)).ceil().clamp(2.0, 64.0) as u32
        }
    });

    if quad {
        let mut rules: Vec<Vec<(f64, f64)>> = Vec::with_capacity(ne);
        for i in 0..ne {
            let (a, b) = mesh.element(i);
            let mut r = Vec::new();
            match (i, q_exp) {
                (0, Some(q)) => graded_rule(a, b, q, &mut r),
                _ => panel_rule(a, b, res.panels, &mut r),
            }
            rules.push(r);
        }
        let xs: Vec<f64> = rules.iter().flatten().map(|p| p.0).collect();
        let semi = want(NormTag::W11) || want(NormTag::H1Semi);
        let (ev, ed) = errors_at(f, net, &xs, semi)?;
        let mut k = 0;
        let mut tot = [0.0f64; 4];
        for (i, r) in rules.iter().enumerate() {
            let mut acc = [0.0f64; 4];
            for &(_, w) in r {
                let (e, d) = (ev[k].abs(), ed[k].abs());
                acc[0] += w * e;
                acc[1] += w * e * e;
                acc[2] += w * d;
                acc[3] += w * d * d;
                k += 1;
            }
            let el = &mut report.elements[i];
            for (tag, v) in [
                (NormTag::L1, acc[0]),
                (NormTag::L2, acc[1].sqrt()),
                (NormTag::W11, acc[2]),
                (NormTag::H1Semi, acc[3].sqrt()),
            ] {
                if want(tag) {
                    el.push((tag, v));
                }
            }
            for j in 0..4 {
                tot[j] += acc[j];
            }
        }
        let per_el = res.panels * GL_NODES;
        for (tag, v) in [
            (NormTag::L1, tot[0]),
            (NormTag::L2, tot[1].sqrt()),
            (NormTag::W11, tot[2]),
            (NormTag::H1Semi, tot[3].sqrt()),
        ] {
            if want(tag) {
                report.entries.push(NormEntry {
                    tag,
                    value: v,
                    method: Method::Quadrature,
                    resolution: per_el,
                    lower_estimate: false,
                });
            }
        }
    }

    for (tag, deriv) in [(NormTag::Linf, false), (NormTag::W1Inf, true)] {
        if !want(tag) {
            continue;
        }
        let g = res.grid;
        let mut xs = Vec::with_capacity(ne * g);
        for i in 0..ne {
            let (a, b) = mesh.element(i);
            let h = (b - a) / (g - 1) as f64;
            if deriv {
                xs.extend((0..g - 1).map(|j| a + (j as f64 + GRID_OFFSET) * h));
            } else {
                xs.extend((0..g).map(|j| if j + 1 == g { b } else { a + j as f64 * h }));
            }
        }
        let (ev, ed) = errors_at(f, net, &xs, deriv)?;
        let vals = if deriv { ed } else { ev };
        let per = if deriv { g - 1 } else { g };
        let mut total: f64 = 0.0;
        for i in 0..ne {
            let m = vals[i * per..(i + 1) * per].iter().fold(0.0f64, |m, v| m.max(v.abs()));
            report.elements[i].push((tag, m));
            total = total.max(m);
        }
        report.entries.push(NormEntry {
            tag,
            value: total,
            method: Method::Grid,
            resolution: per,
            lower_estimate: true,
        });
    }
    report.metrics = net.map(NeuralNetwork::metrics);
    Ok(report)
}

fn sample_target(f: &dyn Target, xs: &[f64], deriv: bool) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut v = Vec::with_capacity(xs.len());
    let mut d = Vec::with_capacity(xs.len());
    for &x in xs {
        let (a, b) = (f.value(x), if deriv { f.derivative(x) } else { 0.0 });
        if !a.is_finite() || !b.is_finite() {
            return data(format!("non-finite target value or derivative at x = {x:e}"));
        }
        v.push(a);
        d.push(b);
    }
    Ok((v, d))
}

/// Values and derivatives of `f − R(net)` at `xs`.
fn errors_at(
    f: &Sampler,
    net: Option<&NeuralNetwork>,
    xs: &[f64],
    deriv: bool,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (mut v, mut d) = f(xs, deriv)?;
    if let Some(n) = net {
        let (nv, nd) = n.realize_scalar_batch_with_derivative(xs)?;
        for k in 0..xs.len() {
            v[k] -= nv[k];
            d[k] -= nd[k];
        }
    }
    Ok((v, d))
}
