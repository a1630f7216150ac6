//! ReLU network data model, forward evaluation and size accounting.

use serde::{Deserialize, Serialize};

use crate::error::{structural, Result};
use crate::par;

/// Points evaluated together in one block of the batched forward pass.
const BLOCK: usize = 64;

/// One affine layer `x -> A x + b` with `A` stored as sorted COO triplets.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Layer {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
    #[serde(skip)]
    row_ptr: Vec<usize>,
}

#[derive(Deserialize)]
struct RawLayer {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
    bias: Vec<f64>,
}

impl<'de> Deserialize<'de> for Layer {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawLayer::deserialize(d)?;
        Layer::new(raw.rows, raw.cols, raw.triplets, raw.bias).map_err(serde::de::Error::custom)
    }
}

impl Layer {
    /// Builds a layer from triplets. Duplicate entries are summed and exact zeros dropped.
    pub fn new(
        rows: usize,
        cols: usize,
        mut triplets: Vec<(usize, usize, f64)>,
        bias: Vec<f64>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return structural("layer dimensions must be positive");
        }
        if bias.len() != rows {
            return structural(format!("bias length {} != rows {}", bias.len(), rows));
        }
        if bias.iter().any(|b| !b.is_finite()) {
            return structural("non-finite bias entry");
        }
        for &(i, j, v) in &triplets {
            if i >= rows || j >= cols {
                return structural(format!("triplet ({i},{j}) outside {rows}x{cols}"));
            }
            if !v.is_finite() {
                return structural(format!("non-finite weight at ({i},{j})"));
            }
        }
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut merged: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
        for t in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == t.0 && last.1 == t.1 => last.2 += t.2,
                _ => merged.push(t),
            }
        }
        merged.retain(|t| t.2 != 0.0);
        let mut row_ptr = vec![0usize; rows + 1];
        for t in &merged {
            row_ptr[t.0 + 1] += 1;
        }
        for i in 0..rows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Layer { rows, cols, triplets: merged, bias, row_ptr })
    }

    /// Builds a layer from a dense row-major matrix.
    pub fn from_dense(matrix: &[Vec<f64>], bias: Vec<f64>) -> Result<Self> {
        let rows = matrix.len();
        let cols = matrix.first().map_or(0, |r| r.len());
        if matrix.iter().any(|r| r.len() != cols) {
            return structural("ragged dense matrix");
        }
        let triplets = matrix
            .iter()
            .enumerate()
            .flat_map(|(i, r)| r.iter().enumerate().map(move |(j, &v)| (i, j, v)))
            .collect();
        Layer::new(rows, cols, triplets, bias)
    }

    /// The `d x d` identity with zero bias.
    pub fn identity(d: usize) -> Self {
        Layer::new(d, d, (0..d).map(|i| (i, i, 1.0)).collect(), vec![0.0; d])
            .expect("identity layer is well formed")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Nonzero weights sorted by (row, column).
    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    /// Nonzero weights of row `i`.
    pub fn row(&self, i: usize) -> &[(usize, usize, f64)] {
        &self.triplets[self.row_ptr[i]..self.row_ptr[i + 1]]
    }

    /// Number of nonzero weights plus nonzero biases.
    pub fn nnz(&self) -> usize {
        self.triplets.len() + self.bias.iter().filter(|b| **b != 0.0).count()
    }

    /// Weight at `(i, j)`, zero when not stored.
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        let row = self.row(i);
        row.binary_search_by(|t| t.1.cmp(&j)).map(|k| row[k].2).unwrap_or(0.0)
    }

    /// `out = A * inp + b` on neuron-major batches of width `nb`.
    fn affine_batch(&self, inp: &[f64], out: &mut [f64], nb: usize) {
        for i in 0..self.rows {
            let o = &mut out[i * nb..(i + 1) * nb];
            o.fill(self.bias[i]);
            for &(_, j, v) in self.row(i) {
                let x = &inp[j * nb..(j + 1) * nb];
                for (o, x) in o.iter_mut().zip(x) {
                    *o += v * x;
                }
            }
        }
    }

    /// Linear part only, used for tangents.
    fn linear_batch(&self, inp: &[f64], out: &mut [f64], nb: usize) {
        for i in 0..self.rows {
            let o = &mut out[i * nb..(i + 1) * nb];
            o.fill(0.0);
            for &(_, j, v) in self.row(i) {
                let x = &inp[j * nb..(j + 1) * nb];
                for (o, x) in o.iter_mut().zip(x) {
                    *o += v * x;
                }
            }
        }
    }
}

/// Depth and nonzero counts of a network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SizeMetrics {
    /// Number of affine layers L.
    pub depth: usize,
    /// Total nonzero weights and biases M.
    pub size: usize,
    /// Nonzeros of the first layer.
    pub size_first: usize,
    /// Nonzeros of the last layer.
    pub size_last: usize,
    /// Largest of the input dimension and all layer widths.
    pub width_max: usize,
}

/// Feed-forward ReLU network; ReLU acts after every layer but the last.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NeuralNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

#[derive(Deserialize)]
struct RawNetwork {
    input_dim: usize,
    layers: Vec<Layer>,
}

impl<'de> Deserialize<'de> for NeuralNetwork {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawNetwork::deserialize(d)?;
        NeuralNetwork::new(raw.input_dim, raw.layers).map_err(serde::de::Error::custom)
    }
}

impl NeuralNetwork {
    /// Checks the layer chain and builds the network.
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        if input_dim == 0 {
            return structural("input dimension must be positive");
        }
        if layers.is_empty() {
            return structural("a network needs at least one layer");
        }
        let mut prev = input_dim;
        for (l, layer) in layers.iter().enumerate() {
            if layer.cols != prev {
                return structural(format!(
                    "layer {} expects {} inputs but receives {}",
                    l + 1,
                    layer.cols,
                    prev
                ));
            }
            prev = layer.rows;
        }
        Ok(NeuralNetwork { input_dim, layers })
    }

    /// Single affine layer.
    pub fn affine(layer: Layer) -> Self {
        let d = layer.cols;
        NeuralNetwork { input_dim: d, layers: vec![layer] }
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map(|l| l.rows).unwrap_or(0)
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn into_layers(self) -> Vec<Layer> {
        self.layers
    }

    pub fn first_layer(&self) -> &Layer {
        &self.layers[0]
    }

    pub fn last_layer(&self) -> &Layer {
        self.layers.last().expect("nonempty")
    }

    pub fn metrics(&self) -> SizeMetrics {
        let size = self.layers.iter().map(Layer::nnz).sum();
        let width_max = self.layers.iter().map(|l| l.rows).fold(self.input_dim, usize::max);
        SizeMetrics {
            depth: self.layers.len(),
            size,
            size_first: self.layers[0].nnz(),
            size_last: self.last_layer().nnz(),
            width_max,
        }
    }

    /// Realization at one point.
    pub fn realize(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return structural(format!("input has length {}, expected {}", x.len(), self.input_dim));
        }
        self.realize_batch(x)
    }

    /// Value and derivative of a scalar-input network.
    pub fn realize_with_derivative(&self, x: f64) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.input_dim != 1 {
            return structural("derivative evaluation needs input dimension 1");
        }
        self.realize_directional(&[x], &[1.0])
    }

    /// Value and directional derivative along `dir`, using the mask rule
    /// "pre-activation > 0 gives slope 1, otherwise 0".
    pub fn realize_directional(&self, x: &[f64], dir: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if x.len() != self.input_dim || dir.len() != self.input_dim {
            return structural("point or direction length differs from input dimension");
        }
        self.realize_batch_directional(x, dir)
    }

    /// Realizations at many points. `points` holds `input_dim` values per point
    /// back to back; the result holds `output_dim` values per point.
    pub fn realize_batch(&self, points: &[f64]) -> Result<Vec<f64>> {
        let d = self.input_dim;
        if points.len() % d != 0 {
            return structural("batch length is not a multiple of the input dimension");
        }
        let n = points.len() / d;
        let od = self.output_dim();
        let mut out = vec![0.0; n * od];
        par::for_chunks_mut(&mut out, BLOCK * od, |c, chunk| {
            let start = c * BLOCK;
            let nb = chunk.len() / od;
            let vals = self.forward_block(&points[start * d..(start + nb) * d], None, nb);
            transpose_into(&vals.0, chunk, od, nb);
        });
        Ok(out)
    }

    /// Values and directional derivatives at many points, laid out like [`Self::realize_batch`].
    pub fn realize_batch_directional(
        &self,
        points: &[f64],
        dirs: &[f64],
    ) -> Result<(Vec<f64>, Vec<f64>)> {
        let d = self.input_dim;
        if points.len() % d != 0 || dirs.len() != points.len() {
            return structural("batch and direction lengths do not match");
        }
        let n = points.len() / d;
        let od = self.output_dim();
        let mut both = vec![0.0; n * od * 2];
        par::for_chunks_mut(&mut both, BLOCK * od * 2, |c, chunk| {
            let start = c * BLOCK;
            let nb = chunk.len() / (2 * od);
            let range = start * d..(start + nb) * d;
            let (v, t) = self.forward_block(&points[range.clone()], Some(&dirs[range]), nb);
            let (cv, ct) = chunk.split_at_mut(nb * od);
            transpose_into(&v, cv, od, nb);
            transpose_into(&t.expect("tangent requested"), ct, od, nb);
        });
        let mut vals = Vec::with_capacity(n * od);
        let mut ders = Vec::with_capacity(n * od);
        for chunk in both.chunks(BLOCK * od * 2) {
            let (cv, ct) = chunk.split_at(chunk.len() / 2);
            vals.extend_from_slice(cv);
            ders.extend_from_slice(ct);
        }
        Ok((vals, ders))
    }

    /// Values and derivatives of a scalar-input network at many points.
    pub fn realize_scalar_batch_with_derivative(&self, xs: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if self.input_dim != 1 {
            return structural("derivative evaluation needs input dimension 1");
        }
        let ones = vec![1.0; xs.len()];
        self.realize_batch_directional(xs, &ones)
    }

    /// Forward pass on one block; returns neuron-major outputs.
    fn forward_block(
        &self,
        points: &[f64],
        dirs: Option<&[f64]>,
        nb: usize,
    ) -> (Vec<f64>, Option<Vec<f64>>) {
        let d = self.input_dim;
        let mut cur = vec![0.0; d * nb];
        for p in 0..nb {
            for i in 0..d {
                cur[i * nb + p] = points[p * d + i];
            }
        }
        let mut tan = dirs.map(|dirs| {
            let mut t = vec![0.0; d * nb];
            for p in 0..nb {
                for i in 0..d {
                    t[i * nb + p] = dirs[p * d + i];
                }
            }
            t
        });
        let last = self.layers.len() - 1;
        for (l, layer) in self.layers.iter().enumerate() {
            let mut next = vec![0.0; layer.rows * nb];
            layer.affine_batch(&cur, &mut next, nb);
            if let Some(t) = tan.as_mut() {
                let mut tn = vec![0.0; layer.rows * nb];
                layer.linear_batch(t, &mut tn, nb);
                if l != last {
                    for (v, dv) in next.iter_mut().zip(tn.iter_mut()) {
                        if *v <= 0.0 {
                            *v = 0.0;
                            *dv = 0.0;
                        }
                    }
                }
                *t = tn;
            } else if l != last {
                for v in next.iter_mut() {
                    *v = v.max(0.0);
                }
            }
            cur = next;
        }
        (cur, tan)
    }
}

fn transpose_into(neuron_major: &[f64], out: &mut [f64], od: usize, nb: usize) {
    for i in 0..od {
        for p in 0..nb {
            out[p * od + i] = neuron_major[i * nb + p];
        }
    }
}
