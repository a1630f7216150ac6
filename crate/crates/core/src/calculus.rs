//! Parallelization, concatenation and identity networks.

use std::collections::BTreeMap;

use crate::error::{structural, Result};
use crate::nn::{Layer, NeuralNetwork};

/// Stacks the rows of two layers reading the same input.
fn stack_shared(a: &Layer, b: &Layer) -> Layer {
    let mut t = a.triplets().to_vec();
    t.extend(b.triplets().iter().map(|&(i, j, v)| (i + a.rows(), j, v)));
    let mut bias = a.bias().to_vec();
    bias.extend_from_slice(b.bias());
    Layer::new(a.rows() + b.rows(), a.cols(), t, bias).expect("stacked layer is well formed")
}

/// Block-diagonal combination of two layers.
fn block_diag(a: &Layer, b: &Layer) -> Layer {
    let mut t = a.triplets().to_vec();
    t.extend(b.triplets().iter().map(|&(i, j, v)| (i + a.rows(), j + a.cols(), v)));
    let mut bias = a.bias().to_vec();
    bias.extend_from_slice(b.bias());
    Layer::new(a.rows() + b.rows(), a.cols() + b.cols(), t, bias)
        .expect("block diagonal layer is well formed")
}

/// Parallelization: both nets read the same input, outputs are stacked.
pub fn parallel(phi1: &NeuralNetwork, phi2: &NeuralNetwork) -> Result<NeuralNetwork> {
    if phi1.input_dim() != phi2.input_dim() {
        return structural(format!(
            "parallel: input dimensions {} and {} differ",
            phi1.input_dim(),
            phi2.input_dim()
        ));
    }
    if phi1.depth() != phi2.depth() {
        return structural(format!("parallel: depths {} and {} differ", phi1.depth(), phi2.depth()));
    }
    let mut layers = vec![stack_shared(phi1.first_layer(), phi2.first_layer())];
    for (a, b) in phi1.layers().iter().zip(phi2.layers()).skip(1) {
        layers.push(block_diag(a, b));
    }
    NeuralNetwork::new(phi1.input_dim(), layers)
}

/// Left fold of [`parallel`] over a nonempty list.
pub fn parallel_many(nets: &[NeuralNetwork]) -> Result<NeuralNetwork> {
    let (first, rest) = nets.split_first().ok_or_else(|| {
        crate::Error::Structural("parallel_many needs at least one network".into())
    })?;
    rest.iter().try_fold(first.clone(), |acc, n| parallel(&acc, n))
}

/// Full parallelization: separate inputs, stacked outputs.
pub fn full_parallel(phi1: &NeuralNetwork, phi2: &NeuralNetwork) -> Result<NeuralNetwork> {
    if phi1.depth() != phi2.depth() {
        return structural(format!(
            "full_parallel: depths {} and {} differ",
            phi1.depth(),
            phi2.depth()
        ));
    }
    let layers = phi1.layers().iter().zip(phi2.layers()).map(|(a, b)| block_diag(a, b)).collect();
    NeuralNetwork::new(phi1.input_dim() + phi2.input_dim(), layers)
}

/// Left fold of [`full_parallel`].
pub fn full_parallel_many(nets: &[NeuralNetwork]) -> Result<NeuralNetwork> {
    let (first, rest) = nets.split_first().ok_or_else(|| {
        crate::Error::Structural("full_parallel_many needs at least one network".into())
    })?;
    rest.iter().try_fold(first.clone(), |acc, n| full_parallel(&acc, n))
}

/// Product `u * v` of two layers as affine maps composed linearly: weight `U V`, bias `U c + a`.
fn merge(outer: &Layer, inner: &Layer) -> Layer {
    let mut acc: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut bias = outer.bias().to_vec();
    for &(i, k, u) in outer.triplets() {
        for &(_, j, v) in inner.row(k) {
            *acc.entry((i, j)).or_insert(0.0) += u * v;
        }
        bias[i] += u * inner.bias()[k];
    }
    let t = acc.into_iter().map(|((i, j), v)| (i, j, v)).collect();
    Layer::new(outer.rows(), inner.cols(), t, bias).expect("merged layer is well formed")
}

/// Plain concatenation `phi1 • phi2`, realizing `R(phi1) ∘ R(phi2)` with depth `L1 + L2 - 1`.
pub fn concat(phi1: &NeuralNetwork, phi2: &NeuralNetwork) -> Result<NeuralNetwork> {
    if phi1.input_dim() != phi2.output_dim() {
        return structural(format!(
            "concat: outer input dimension {} != inner output dimension {}",
            phi1.input_dim(),
            phi2.output_dim()
        ));
    }
    let l2 = phi2.depth();
    let mut layers: Vec<Layer> = phi2.layers()[..l2 - 1].to_vec();
    layers.push(merge(phi1.first_layer(), phi2.last_layer()));
    layers.extend_from_slice(&phi1.layers()[1..]);
    NeuralNetwork::new(phi2.input_dim(), layers)
}

/// Sparse concatenation `phi1 ⊙ phi2` through the splice `t = ρ(t) − ρ(−t)`; depth `L1 + L2`.
pub fn sparse_concat(phi1: &NeuralNetwork, phi2: &NeuralNetwork) -> Result<NeuralNetwork> {
    let d = phi2.output_dim();
    if phi1.input_dim() != d {
        return structural(format!(
            "sparse_concat: outer input dimension {} != inner output dimension {}",
            phi1.input_dim(),
            d
        ));
    }
    let last = phi2.last_layer();
    let mut t = last.triplets().to_vec();
    t.extend(last.triplets().iter().map(|&(i, j, v)| (i + d, j, -v)));
    let mut bias = last.bias().to_vec();
    bias.extend(last.bias().iter().map(|b| -b));
    let doubled = Layer::new(2 * d, last.cols(), t, bias)?;

    let first = phi1.first_layer();
    let mut t = first.triplets().to_vec();
    t.extend(first.triplets().iter().map(|&(i, j, v)| (i, j + d, -v)));
    let split = Layer::new(first.rows(), 2 * d, t, first.bias().to_vec())?;

    let mut layers: Vec<Layer> = phi2.layers()[..phi2.depth() - 1].to_vec();
    layers.push(doubled);
    layers.push(split);
    layers.extend_from_slice(&phi1.layers()[1..]);
    NeuralNetwork::new(phi2.input_dim(), layers)
}

/// Identity network on `R^d` of depth `depth`.
pub fn identity_net(d: usize, depth: usize) -> Result<NeuralNetwork> {
    if d == 0 || depth == 0 {
        return structural("identity_net needs positive dimension and depth");
    }
    if depth == 1 {
        return Ok(NeuralNetwork::affine(Layer::identity(d)));
    }
    let up = Layer::new(
        2 * d,
        d,
        (0..d).flat_map(|i| [(i, i, 1.0), (i + d, i, -1.0)]).collect(),
        vec![0.0; 2 * d],
    )?;
    let down = Layer::new(
        d,
        2 * d,
        (0..d).flat_map(|i| [(i, i, 1.0), (i, i + d, -1.0)]).collect(),
        vec![0.0; d],
    )?;
    let mut layers = vec![up];
    layers.extend((0..depth - 2).map(|_| Layer::identity(2 * d)));
    layers.push(down);
    NeuralNetwork::new(d, layers)
}
