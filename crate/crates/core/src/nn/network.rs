//! Dense feed-forward network with batched forward and backward passes.
//!
//! Parameters live in one flat buffer laid out in canonical snapshot order:
//! layer 0 weights (row-major, `out x in`), layer 0 bias, layer 1 weights, and
//! so on. The optimizer and the federation layer operate directly on that
//! buffer, so taking a snapshot is a plain copy.

use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::snapshot::WeightSnapshot;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output, which for relu
    /// is positive exactly when the pre-activation is.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Relu => {
                if y > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

/// Borrowed view of one layer.
#[derive(Debug, Clone, Copy)]
pub struct LayerView<'a> {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim x in_dim`.
    pub weights: &'a [f64],
    pub bias: &'a [f64],
    pub activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseNetwork {
    dims: Vec<usize>,
    activations: Vec<Activation>,
    params: Vec<f64>,
    /// Bumped on every parameter mutation; caches remember the value they saw.
    version: u64,
}

/// Activations recorded by [`DenseNetwork::forward`], consumed by
/// [`DenseNetwork::backward`].
#[derive(Debug, Clone)]
pub struct ForwardCache {
    dims: Vec<usize>,
    version: u64,
    /// `values[l]` is the input fed to layer `l`; the last entry is the
    /// network output.
    values: Vec<Matrix>,
}

impl ForwardCache {
    pub fn output(&self) -> &Matrix {
        self.values.last().expect("cache always holds the input")
    }
}

/// Gradients of a scalar loss.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// d loss / d parameter, in canonical snapshot order.
    pub params: Vec<f64>,
    /// d loss / d network input.
    pub input: Matrix,
}

impl DenseNetwork {
    /// Zero-initialised network. `activations.len()` must be `dims.len() - 1`.
    pub fn zeros(dims: &[usize], activations: &[Activation]) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Shape("a network needs at least one layer".into()));
        }
        if dims.contains(&0) {
            return Err(Error::Shape(format!("zero-width layer in {dims:?}")));
        }
        if activations.len() != dims.len() - 1 {
            return Err(Error::Shape(format!(
                "{} activations for {} layers",
                activations.len(),
                dims.len() - 1
            )));
        }
        let count = dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum();
        Ok(Self {
            dims: dims.to_vec(),
            activations: activations.to_vec(),
            params: vec![0.0; count],
            version: 0,
        })
    }

    /// Relu hidden layers and a linear output layer, zero parameters.
    pub fn regression_zeros(dims: &[usize]) -> Result<Self> {
        let mut acts = vec![Activation::Relu; dims.len().saturating_sub(2)];
        acts.push(Activation::Linear);
        Self::zeros(dims, &acts)
    }

    /// Relu hidden layers, linear output, Glorot-uniform weights and zero biases.
    pub fn regression<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut net = Self::regression_zeros(dims)?;
        net.glorot_init(rng);
        Ok(net)
    }

    /// Draws every weight from `U(-l, l)` with `l = sqrt(6 / (fan_in + fan_out))`
    /// and zeroes every bias.
    pub fn glorot_init<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let mut offset = 0;
        for l in 0..self.num_layers() {
            let (fan_in, fan_out) = (self.dims[l], self.dims[l + 1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
            let w = fan_in * fan_out;
            for p in &mut self.params[offset..offset + w] {
                *p = dist.sample(rng);
            }
            for p in &mut self.params[offset + w..offset + w + fan_out] {
                *p = 0.0;
            }
            offset += w + fan_out;
        }
        self.version += 1;
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.dims.last().expect("at least two dims")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    /// Mutable access to the flat parameter buffer; invalidates outstanding caches.
    pub fn params_mut(&mut self) -> &mut [f64] {
        self.version += 1;
        &mut self.params
    }

    /// `(rows, cols)` of every parameter block in canonical order.
    pub fn shape_spec(&self) -> Vec<(usize, usize)> {
        self.dims
            .windows(2)
            .flat_map(|w| [(w[1], w[0]), (w[1], 1)])
            .collect()
    }

    pub fn layer(&self, l: usize) -> LayerView<'_> {
        let offset: usize = self.dims[..=l]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        let (in_dim, out_dim) = (self.dims[l], self.dims[l + 1]);
        let w_end = offset + in_dim * out_dim;
        LayerView {
            in_dim,
            out_dim,
            weights: &self.params[offset..w_end],
            bias: &self.params[w_end..w_end + out_dim],
            activation: self.activations[l],
        }
    }

    pub fn layers(&self) -> impl Iterator<Item = LayerView<'_>> {
        (0..self.num_layers()).map(move |l| self.layer(l))
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    pub fn snapshot(&self) -> WeightSnapshot {
        WeightSnapshot::new_unchecked(self.params.clone(), self.shape_spec())
    }

    /// Loads parameters from a snapshot taken from an identically shaped network.
    pub fn restore(&mut self, snapshot: &WeightSnapshot) -> Result<()> {
        let spec = self.shape_spec();
        if snapshot.shape_spec() != spec.as_slice() {
            return Err(Error::Shape(format!(
                "snapshot shape {:?} does not fit network shape {:?}",
                snapshot.shape_spec(),
                spec
            )));
        }
        self.params.copy_from_slice(snapshot.values());
        self.version += 1;
        Ok(())
    }

    /// Forward pass over a batch (one sample per row).
    pub fn forward(&self, inputs: &Matrix) -> Result<(Matrix, ForwardCache)> {
        let cache = self.forward_cached(inputs)?;
        Ok((cache.output().clone(), cache))
    }

    /// Forward pass returning only the outputs.
    pub fn predict(&self, inputs: &Matrix) -> Result<Matrix> {
        self.check_input(inputs)?;
        let mut x = inputs.clone();
        for layer in self.layers() {
            x = layer_forward(&layer, &x);
        }
        Ok(x)
    }

    pub fn forward_cached(&self, inputs: &Matrix) -> Result<ForwardCache> {
        self.check_input(inputs)?;
        let mut values = Vec::with_capacity(self.dims.len());
        values.push(inputs.clone());
        for layer in self.layers() {
            let next = layer_forward(&layer, values.last().expect("non-empty"));
            values.push(next);
        }
        Ok(ForwardCache {
            dims: self.dims.clone(),
            version: self.version,
            values,
        })
    }

    /// Backpropagates `loss_grad` (d loss / d output) through the cached pass.
    pub fn backward(&self, cache: &ForwardCache, loss_grad: &Matrix) -> Result<Gradients> {
        if cache.dims != self.dims || cache.version != self.version {
            return Err(Error::Contract(
                "forward cache does not belong to this network state".into(),
            ));
        }
        let out = cache.output();
        if loss_grad.shape() != out.shape() {
            return Err(Error::Shape(format!(
                "loss gradient is {:?}, network output is {:?}",
                loss_grad.shape(),
                out.shape()
            )));
        }

        let mut grads = vec![0.0; self.params.len()];
        let mut upstream = loss_grad.clone();
        let mut offset = self.params.len();
        for l in (0..self.num_layers()).rev() {
            let layer = self.layer(l);
            let (in_dim, out_dim) = (layer.in_dim, layer.out_dim);
            offset -= in_dim * out_dim + out_dim;
            let x = &cache.values[l];
            let y = &cache.values[l + 1];
            let rows = x.rows();

            // delta = upstream * act'(z), in place
            if layer.activation != Activation::Linear {
                for (d, &yv) in upstream.as_mut_slice().iter_mut().zip(y.as_slice()) {
                    *d *= layer.activation.derivative_from_output(yv);
                }
            }
            let delta = upstream;

            let (gw, gb) = grads[offset..offset + in_dim * out_dim + out_dim].split_at_mut(in_dim * out_dim);
            let mut dx = Matrix::zeros(rows, in_dim);
            for r in 0..rows {
                let xr = x.row(r);
                let dr = delta.row(r);
                let dxr = dx.row_mut(r);
                for o in 0..out_dim {
                    let d = dr[o];
                    if d == 0.0 {
                        continue;
                    }
                    gb[o] += d;
                    let grow = &mut gw[o * in_dim..(o + 1) * in_dim];
                    let wrow = &layer.weights[o * in_dim..(o + 1) * in_dim];
                    for i in 0..in_dim {
                        grow[i] += d * xr[i];
                        dxr[i] += d * wrow[i];
                    }
                }
            }
            upstream = dx;
        }
        Ok(Gradients {
            params: grads,
            input: upstream,
        })
    }

    fn check_input(&self, inputs: &Matrix) -> Result<()> {
        if inputs.cols() != self.dims[0] {
            return Err(Error::Shape(format!(
                "input has {} columns, network expects {}",
                inputs.cols(),
                self.dims[0]
            )));
        }
        Ok(())
    }
}

fn layer_forward(layer: &LayerView<'_>, x: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), layer.out_dim);
    for r in 0..x.rows() {
        let xr = x.row(r);
        let orow = out.row_mut(r);
        for o in 0..layer.out_dim {
            let wrow = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
            let z = layer.bias[o] + dot(wrow, xr);
            orow[o] = layer.activation.apply(z);
        }
    }
    out
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    // four accumulators keep the loop vectorisable
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = c * 4;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    let mut s = (acc[0] + acc[1]) + (acc[2] + acc[3]);
    for i in chunks * 4..a.len() {
        s += a[i] * b[i];
    }
    s
}
