//! Network to piecewise Chebyshev expansion and back.

use serde::{Deserialize, Serialize};

use crate::error::{data, Result};
use crate::nn::NeuralNetwork;
use crate::sobolev::{net_diff_norms, target_norms, BoundCheck, ErrorReport, NormTag};
use crate::spline::{build_spline_emulator, Mesh, PiecewiseCheb, SplineLayout};

const NODE_TOL: f64 = 1e-10;

/// How the coefficients were obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Extraction {
    /// Read from the output layer of a spline emulator.
    OutputLayer,
    /// Sampled at the CC points and transformed.
    Sampled,
}

/// Samples `net` at every element's CC points and interpolates.
pub fn sample_network(net: &NeuralNetwork, mesh: &Mesh) -> Result<PiecewiseCheb> {
    let pts = mesh.cc_points();
    let flat: Vec<f64> = pts.iter().flatten().copied().collect();
    let vals = net.realize_batch(&flat)?;
    if net.output_dim() != 1 {
        return data("round trips need a scalar network");
    }
    let mut k = 0;
    let values: Vec<Vec<f64>> = pts
        .iter()
        .map(|p| {
            let v = vals[k..k + p.len()].to_vec();
            k += p.len();
            v
        })
        .collect();
    PiecewiseCheb::from_element_values(mesh.clone(), &values)
}

/// Coefficients of `net` on `mesh`, read directly when the output layer has the spline layout.
pub fn extract(net: &NeuralNetwork, mesh: &Mesh) -> Result<(PiecewiseCheb, Extraction)> {
    if net.depth() >= 2 {
        if let Ok(v) = SplineLayout::for_mesh(mesh).read(net) {
            // a spline emulator is exact at the nodes
            let at = net.realize_batch(mesh.nodes())?;
            let exact = at.iter().zip(v.nodal_values()).all(|(a, b)| (a - b).abs() <= NODE_TOL * 1f64.max(b.abs()));
            if exact {
                return Ok((v, Extraction::OutputLayer));
            }
        }
    }
    Ok((sample_network(net, mesh)?, Extraction::Sampled))
}

/// `ε̃ = (ε/8)·max_i h_i |v|_{W^{1,∞}(I_i)}`, the sup-norm accuracy of an emulation of `v`.
pub fn sup_accuracy(v: &PiecewiseCheb, eps: f64) -> Result<f64> {
    let mesh = v.mesh();
    let r = target_norms(v, mesh, &[NormTag::W1Inf])?;
    Ok((0..mesh.n_elements())
        .map(|i| 0.125 * eps * mesh.h(i) * r.element(i, NormTag::W1Inf).unwrap_or(0.0))
        .fold(0.0, f64::max))
}

/// Result of a round trip.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RoundTrip {
    pub extraction: Extraction,
    pub spline: PiecewiseCheb,
    /// Largest gap between the read-off and the sampled coefficients.
    pub sampled_gap: f64,
    pub eps_tilde: f64,
    pub report: ErrorReport,
    #[serde(skip)]
    pub network: Option<NeuralNetwork>,
}

/// Extracts the expansion of `net`, re-emulates it at `eps` and compares the two networks.
pub fn round_trip(net: &NeuralNetwork, mesh: &Mesh, eps: f64) -> Result<RoundTrip> {
    let (v, extraction) = extract(net, mesh)?;
    let sampled = sample_network(net, mesh)?;
    let sampled_gap = v
        .series()
        .iter()
        .zip(sampled.series())
        .flat_map(|(a, b)| a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).abs()))
        .fold(0.0, f64::max);
    let out = build_spline_emulator(&v, eps)?;
    let mut report = net_diff_norms(net, &out, mesh, &[NormTag::Linf])?;
    let eps_tilde = sup_accuracy(&v, eps)?;
    if extraction == Extraction::OutputLayer {
        let gap = report.get(NormTag::Linf).unwrap_or(0.0);
        report.check(BoundCheck::measured("|R(in) - R(out)|_Linf <= 2 eps~", gap, 2.0 * eps_tilde));
    }
    Ok(RoundTrip { extraction, spline: v, sampled_gap, eps_tilde, report, network: Some(out) })
}
