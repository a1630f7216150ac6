//! Convergence studies: p-version on uniform meshes, hp on geometric meshes, free-knot splines.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{parameter, Result};
use crate::par;
use crate::sobolev::{measure, BoundCheck, NormTag, Resolution, Target};
use crate::spline::{build_spline_emulator, sample_to_spline, uniform_mesh, Mesh, PiecewiseCheb};

/// Geometric mesh `T_{σ,N}` with degrees `p_1 = 1`, `p_i = ⌊μ i^δ⌋`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometricMeshSpec {
    pub sigma: f64,
    pub n: usize,
    pub mu: f64,
    pub delta_gevrey: f64,
}

impl GeometricMeshSpec {
    pub fn new(sigma: f64, n: usize, mu: f64, delta_gevrey: f64) -> Result<Self> {
        let s = GeometricMeshSpec { sigma, n, mu, delta_gevrey };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return parameter(format!("sigma = {} not in (0, 1)", self.sigma));
        }
        if self.n == 0 {
            return parameter("N must be at least 1");
        }
        if !(self.mu >= 1.0) || !self.mu.is_finite() {
            return parameter(format!("mu = {} must be at least 1", self.mu));
        }
        if !(self.delta_gevrey >= 1.0) || !self.delta_gevrey.is_finite() {
            return parameter(format!("delta = {} must be at least 1", self.delta_gevrey));
        }
        Ok(())
    }

    /// `λ = 1/σ − 1`.
    pub fn lambda(&self) -> f64 {
        1.0 / self.sigma - 1.0
    }

    /// `μ₀(σ, β, δ, d_u) = max{1, d_u λ e^{1−δ} / (2σ^{1−β})}`.
    pub fn mu0(&self, beta: f64, d_u: f64) -> f64 {
        let v = d_u * self.lambda() * (1.0 - self.delta_gevrey).exp()
            / (2.0 * self.sigma.powf(1.0 - beta));
        v.max(1.0)
    }

    pub fn degrees(&self) -> Vec<usize> {
        (1..=self.n)
            .map(|i| {
                if i == 1 {
                    1
                } else {
                    ((self.mu * (i as f64).powf(self.delta_gevrey)).floor() as usize).max(1)
                }
            })
            .collect()
    }
}

/// Nodes `(0, σ^{N−1}, …, σ, 1)`, each obtained from the next by one multiplication with `σ`.
pub fn geometric_mesh(spec: &GeometricMeshSpec) -> Result<Mesh> {
    spec.validate()?;
    let n = spec.n;
    let mut nodes = vec![0.0; n + 1];
    nodes[n] = 1.0;
    for i in (1..n).rev() {
        nodes[i] = spec.sigma * nodes[i + 1];
    }
    Mesh::new(nodes, spec.degrees())
}

/// One row of a study table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRecord {
    /// Element count, or the degree in a p-version study.
    pub n: usize,
    pub dof: usize,
    pub nn_size: usize,
    pub nn_depth: usize,
    pub error_l2: f64,
    pub error_h1: f64,
    pub error_linf: f64,
    pub wall_time_s: f64,
}

impl StudyRecord {
    /// Equality of everything except the wall time.
    pub fn same_result(&self, other: &StudyRecord) -> bool {
        StudyRecord { wall_time_s: 0.0, ..self.clone() } == StudyRecord { wall_time_s: 0.0, ..other.clone() }
    }
}

/// Least-squares line `y ≈ intercept + slope·x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<LinearFit> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return parameter("a linear fit needs at least two paired points");
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my) * (y - my)).sum();
    if sxx == 0.0 {
        return parameter("a linear fit needs at least two distinct abscissae");
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(LinearFit { slope, intercept, r2 })
}

/// Algebraic rate `−d log(error_H1) / d log(n)` over the given rows.
pub fn algebraic_rate(records: &[StudyRecord]) -> Result<f64> {
    Ok(-fit_log_log(records)?.slope)
}

/// How the emulation tolerance follows the discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum EpsRule {
    Fixed(f64),
    /// `ε = (Np)^{−s̄}`.
    Algebraic { s_bar: f64 },
    /// `ε = exp(−cN)`.
    Exponential { c: f64 },
}

/// Upper end of the tolerance range used when a rule gives `ε ≥ 1`.
const EPS_CAP: f64 = 0.5;

impl EpsRule {
    pub fn eps(&self, n: usize, p: usize) -> f64 {
        let e = match *self {
            EpsRule::Fixed(e) => e,
            EpsRule::Algebraic { s_bar } => ((n * p) as f64).powf(-s_bar),
            EpsRule::Exponential { c } => (-c * n as f64).exp(),
        };
        e.min(EPS_CAP)
    }
}

/// What the network error is measured against.
pub enum Reference<'a> {
    /// The emulated spline itself.
    Spline,
    /// A target function, with an optional `x^α` singularity at the left end.
    Target { f: &'a dyn Target, singular: Option<f64> },
}

/// Result of a study: rows plus the ledger of assertions made along the way.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Study {
    pub records: Vec<StudyRecord>,
    pub checks: Vec<BoundCheck>,
    pub fits: Vec<(String, LinearFit)>,
    pub warnings: Vec<String>,
}

impl Study {
    pub fn fit(&self, name: &str) -> Option<LinearFit> {
        self.fits.iter().find(|(n, _)| n == name).map(|f| f.1)
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks.iter().all(|c| c.satisfied)
    }
}

/// Emulates `v` at `eps` and measures the error against `reference`.
pub fn emulate_and_measure(
    v: &PiecewiseCheb,
    eps: f64,
    reference: &Reference,
    label: usize,
) -> Result<(StudyRecord, Vec<BoundCheck>)> {
    let start = Instant::now();
    let net = build_spline_emulator(v, eps)?;
    let mesh = v.mesh();
    let norms = [NormTag::L2, NormTag::H1Semi, NormTag::Linf];
    let report = match reference {
        Reference::Spline => measure(v, Some(&net), mesh, &norms, Resolution::default())?,
        Reference::Target { f, singular } => {
            let res = Resolution { singular: *singular, ..Resolution::default() };
            measure(*f, Some(&net), mesh, &norms, res)?
        }
    };
    let m = net.metrics();
    let n = mesh.n_elements();
    let pmax = mesh.degrees().iter().copied().max().unwrap_or(1);
    let checks = vec![
        BoundCheck::exact(format!("n={label}: size_first <= 2N+2"), m.size_first as f64, (2 * n + 2) as f64),
        BoundCheck::exact(
            format!("n={label}: size_last <= N(2p+3)+1"),
            m.size_last as f64,
            (n * (2 * pmax + 3) + 1) as f64,
        ),
    ];
    let l2 = report.get(NormTag::L2).unwrap_or(0.0);
    let semi = report.get(NormTag::H1Semi).unwrap_or(0.0);
    let record = StudyRecord {
        n: label,
        dof: mesh.dof(),
        nn_size: m.size,
        nn_depth: m.depth,
        error_l2: l2,
        error_h1: l2.hypot(semi),
        error_linf: report.get(NormTag::Linf).unwrap_or(0.0),
        wall_time_s: start.elapsed().as_secs_f64(),
    };
    Ok((record, checks))
}

fn collect(rows: Vec<Result<(StudyRecord, Vec<BoundCheck>)>>) -> Result<Study> {
    let mut study = Study::default();
    for r in rows {
        let (rec, checks) = r?;
        study.records.push(rec);
        study.checks.extend(checks);
    }
    study.records.sort_by_key(|r| r.n);
    Ok(study)
}

/// p-version on `n_elems` uniform elements of `[0, 1]`; one row per degree, keyed by `p`.
pub fn run_p_version_study(
    f: &dyn Target,
    s_bar: f64,
    n_elems: usize,
    p_list: &[usize],
    eps_rule: EpsRule,
) -> Result<Study> {
    if !(s_bar >= 0.0) {
        return parameter(format!("smoothness {s_bar} must be nonnegative"));
    }
    let rows = par::map(p_list, |&p| {
        let mesh = uniform_mesh(0.0, 1.0, n_elems, p)?;
        let v = sample_to_spline(&|x| f.value(x), &mesh)?;
        let eps = eps_rule.eps(n_elems, p);
        emulate_and_measure(&v, eps, &Reference::Target { f, singular: None }, p)
    });
    let mut study = collect(rows)?;
    if study.records.len() >= 2 {
        let fit = fit_log_log(&study.records)?;
        let rate = -fit.slope;
        study.fits.push(("log error_H1 vs log p".into(), fit));
        if rate < s_bar - 0.25 {
            study.warnings.push(format!("fitted rate {rate:.3} is below s - 0.25 = {:.3}", s_bar - 0.25));
        }
    }
    Ok(study)
}

fn fit_log_log(records: &[StudyRecord]) -> Result<LinearFit> {
    let xs: Vec<f64> = records.iter().map(|r| (r.n as f64).ln()).collect();
    let ys: Vec<f64> = records.iter().map(|r| r.error_h1.ln()).collect();
    linear_fit(&xs, &ys)
}

/// `x^α − x`.
#[derive(Debug, Clone, Copy)]
pub struct SingularTarget {
    pub alpha: f64,
}

impl Target for SingularTarget {
    fn value(&self, x: f64) -> f64 {
        x.powf(self.alpha) - x
    }
    fn derivative(&self, x: f64) -> f64 {
        self.alpha * x.powf(self.alpha - 1.0) - 1.0
    }
}

/// Parameters of an hp study.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HpOptions {
    pub alpha: f64,
    pub specs: Vec<GeometricMeshSpec>,
    /// Rate `c` in `ε = exp(−cN)`; defaults to `(1 − β) log(1/σ)` with `β = 1 − α`.
    pub c: Option<f64>,
    /// Declared `(β, d_u)` of the target for the `μ₀` guard.
    pub gevrey: Option<(f64, f64)>,
}

impl HpOptions {
    /// `σ`, `μ`, `δ` shared by `N = 1..=n_max`.
    pub fn sweep(alpha: f64, sigma: f64, mu: f64, delta: f64, ns: impl IntoIterator<Item = usize>) -> Result<Self> {
        let specs = ns
            .into_iter()
            .map(|n| GeometricMeshSpec::new(sigma, n, mu, delta))
            .collect::<Result<_>>()?;
        Ok(HpOptions { alpha, specs, c: None, gevrey: None })
    }

    pub fn rate(&self, sigma: f64) -> f64 {
        self.c.unwrap_or_else(|| self.alpha * (1.0 / sigma).ln())
    }
}

/// hp interpolation on geometric meshes, emulated at `ε = exp(−cN)`.
pub fn run_hp_study(opts: &HpOptions, target: Option<&dyn Target>) -> Result<Study> {
    let alpha = opts.alpha;
    if !(alpha > 0.0 && alpha < 1.0) {
        return parameter(format!("alpha = {alpha} not in (0, 1)"));
    }
    if opts.specs.is_empty() {
        return parameter("an hp study needs at least one mesh");
    }
    let default = SingularTarget { alpha };
    let u: &dyn Target = target.unwrap_or(&default);
    let mut warnings = Vec::new();
    if let Some((beta, d_u)) = opts.gevrey {
        for s in &opts.specs {
            let mu0 = s.mu0(beta, d_u);
            if s.mu <= mu0 {
                let w = format!("N={}: mu = {} does not exceed mu0 = {mu0:.4}", s.n, s.mu);
                log::warn!("{w}");
                warnings.push(w);
            }
        }
    }
    let rows = par::map(&opts.specs, |spec| {
        let mesh = geometric_mesh(spec)?;
        let v = sample_to_spline(&|x| u.value(x), &mesh)?;
        let eps = EpsRule::Exponential { c: opts.rate(spec.sigma) }.eps(spec.n, 1);
        emulate_and_measure(&v, eps, &Reference::Target { f: u, singular: Some(alpha) }, spec.n)
    });
    let mut study = collect(rows)?;
    study.warnings.extend(warnings);
    if study.records.len() >= 2 {
        let ys: Vec<f64> = study.records.iter().map(|r| r.error_h1.ln()).collect();
        let ns: Vec<f64> = study.records.iter().map(|r| r.n as f64).collect();
        let delta = opts.specs[0].delta_gevrey;
        let ms: Vec<f64> = study.records.iter().map(|r| (r.nn_size as f64).powf(1.0 / (2.0 + delta))).collect();
        study.fits.push(("log error_H1 vs N".into(), linear_fit(&ns, &ys)?));
        study.fits.push(("log error_H1 vs M^(1/(2+delta))".into(), linear_fit(&ms, &ys)?));
    }
    Ok(study)
}

/// Emulates a supplied spline at each tolerance; rows are keyed by the element count.
pub fn run_free_knot_study(v: &PiecewiseCheb, eps_list: &[f64], reference: &Reference) -> Result<Study> {
    let rows: Vec<_> = eps_list
        .iter()
        .map(|&eps| emulate_and_measure(v, eps, reference, v.mesh().n_elements()))
        .collect();
    let mut study = Study::default();
    for r in rows {
        let (rec, checks) = r?;
        study.records.push(rec);
        study.checks.extend(checks);
    }
    Ok(study)
}
