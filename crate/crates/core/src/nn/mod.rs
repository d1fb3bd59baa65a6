//! Minimal dense feed-forward network engine.
//!
//! Networks are a stack of affine layers with elementwise activations. All
//! parameters live in one flat `Vec<f64>` (per layer: row-major weight matrix
//! with shape `(output_dim, input_dim)`, then the bias vector), which is the
//! genome representation used by the evolutionary search. Forward and backward
//! passes are batched internally; the single-sample entry points are the
//! one-row special case, so both paths produce identical values.

mod io;
mod optim;

pub use io::{load_weights, save_weights, WeightHeader};
pub use optim::{OptimizerKind, OptimizerState};

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Elementwise activation applied after a layer's affine transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Tanh,
    Relu,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed in terms of the activation output `y`.
    #[inline]
    pub fn deriv_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
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

/// Shape and activation of one dense layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub input_dim: usize,
    pub output_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(input_dim: usize, output_dim: usize, activation: Activation) -> Self {
        Self {
            input_dim,
            output_dim,
            activation,
        }
    }

    /// Number of parameters (weights plus biases) of this layer.
    pub fn param_count(&self) -> usize {
        self.input_dim * self.output_dim + self.output_dim
    }
}

/// Dense feed-forward network with a flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    layers: Vec<LayerSpec>,
    weights: Vec<f64>,
}

/// Total parameter count for a layer stack.
pub fn param_count(layers: &[LayerSpec]) -> usize {
    layers.iter().map(LayerSpec::param_count).sum()
}

fn validate_layers(layers: &[LayerSpec]) -> Result<()> {
    if layers.is_empty() {
        return Err(Error::InvalidNetwork("network needs at least one layer".into()));
    }
    for spec in layers {
        if spec.input_dim == 0 || spec.output_dim == 0 {
            return Err(Error::InvalidNetwork(format!(
                "layer dims must be >= 1, got {}x{}",
                spec.input_dim, spec.output_dim
            )));
        }
    }
    for (a, b) in layers.iter().zip(layers.iter().skip(1)) {
        if a.output_dim != b.input_dim {
            return Err(Error::InvalidNetwork(format!(
                "layer chain mismatch: output dim {} feeds input dim {}",
                a.output_dim, b.input_dim
            )));
        }
    }
    Ok(())
}

impl Network {
    /// Builds a network with all parameters zero.
    pub fn zeros(layers: Vec<LayerSpec>) -> Result<Self> {
        validate_layers(&layers)?;
        let n = param_count(&layers);
        Ok(Self {
            layers,
            weights: vec![0.0; n],
        })
    }

    /// Builds a network with weights and biases drawn uniformly from
    /// `[-1/sqrt(fan_in), +1/sqrt(fan_in)]` per layer, seeded.
    pub fn uniform_init(layers: Vec<LayerSpec>, seed: u64) -> Result<Self> {
        let mut net = Self::zeros(layers)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut offset = 0;
        for spec in net.layers.clone() {
            let limit = 1.0 / (spec.input_dim as f64).sqrt();
            let dist = Uniform::new_inclusive(-limit, limit);
            for w in &mut net.weights[offset..offset + spec.param_count()] {
                *w = dist.sample(&mut rng);
            }
            offset += spec.param_count();
        }
        Ok(net)
    }

    /// Convenience builder: hidden layers with `hidden_act`, final layer with `output_act`.
    pub fn mlp(dims: &[usize], hidden_act: Activation, output_act: Activation) -> Result<Vec<LayerSpec>> {
        if dims.len() < 2 {
            return Err(Error::InvalidNetwork("mlp needs at least input and output dims".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for i in 0..dims.len() - 1 {
            let act = if i + 2 == dims.len() { output_act } else { hidden_act };
            layers.push(LayerSpec::new(dims[i], dims[i + 1], act));
        }
        Ok(layers)
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].output_dim
    }

    pub fn num_params(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    /// Replaces the flat parameter vector. Length must match and all entries
    /// must be finite.
    pub fn set_weights(&mut self, weights: &[f64]) -> Result<()> {
        if weights.len() != self.weights.len() {
            return Err(Error::Dimension {
                context: "set_weights",
                expected: self.weights.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("network weights"));
        }
        self.weights.copy_from_slice(weights);
        Ok(())
    }

    /// Constructs a network directly from a layer stack and a flat vector.
    pub fn from_flat(layers: Vec<LayerSpec>, weights: Vec<f64>) -> Result<Self> {
        validate_layers(&layers)?;
        let expected = param_count(&layers);
        if weights.len() != expected {
            return Err(Error::Dimension {
                context: "from_flat",
                expected,
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("network weights"));
        }
        Ok(Self { layers, weights })
    }

    /// Weight matrix and bias views for layer `idx`.
    fn layer_params(&self, idx: usize) -> (ArrayView2<'_, f64>, ArrayView1<'_, f64>) {
        let offset: usize = self.layers[..idx].iter().map(LayerSpec::param_count).sum();
        let spec = &self.layers[idx];
        let wlen = spec.input_dim * spec.output_dim;
        let w = ArrayView2::from_shape(
            (spec.output_dim, spec.input_dim),
            &self.weights[offset..offset + wlen],
        )
        .expect("layer weight view");
        let b = ArrayView1::from(&self.weights[offset + wlen..offset + wlen + spec.output_dim]);
        (w, b)
    }

    /// Forward pass on one input vector.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "forward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let out = self.forward_batch(x);
        Ok(out.into_raw_vec_and_offset().0)
    }

    /// Forward pass on a batch, one sample per row. Rows must have width
    /// `input_dim`; callers are expected to uphold that (checked internally).
    pub fn forward_batch(&self, input: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(input.ncols(), self.input_dim(), "forward_batch input width");
        let mut cur = input.to_owned();
        for idx in 0..self.layers.len() {
            cur = self.layer_forward(idx, &cur);
        }
        cur
    }

    fn layer_forward(&self, idx: usize, x: &Array2<f64>) -> Array2<f64> {
        let spec = &self.layers[idx];
        let (w, b) = self.layer_params(idx);
        let mut z = x.dot(&w.t());
        z += &b;
        if spec.activation != Activation::Linear {
            z.mapv_inplace(|v| spec.activation.apply(v));
        }
        z
    }

    /// Forward pass keeping every layer's post-activation output, for backprop.
    pub(crate) fn forward_batch_cached(&self, input: &ArrayView2<'_, f64>) -> Vec<Array2<f64>> {
        let mut outs = Vec::with_capacity(self.layers.len());
        let mut cur = input.to_owned();
        for idx in 0..self.layers.len() {
            cur = self.layer_forward(idx, &cur);
            outs.push(cur.clone());
        }
        outs
    }

    /// Exact gradients of `upstream_grad . output` with respect to the flat
    /// parameter vector and the input, for one sample.
    pub fn backward(&self, input: &[f64], upstream_grad: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        if input.len() != self.input_dim() {
            return Err(Error::Dimension {
                context: "backward input",
                expected: self.input_dim(),
                actual: input.len(),
            });
        }
        if upstream_grad.len() != self.output_dim() {
            return Err(Error::Dimension {
                context: "backward upstream",
                expected: self.output_dim(),
                actual: upstream_grad.len(),
            });
        }
        let x = ArrayView2::from_shape((1, input.len()), input).expect("row view");
        let g = ArrayView2::from_shape((1, upstream_grad.len()), upstream_grad).expect("row view");
        let (wgrad, xgrad) = self.backward_batch(x, g);
        Ok((wgrad, xgrad.into_raw_vec_and_offset().0))
    }

    /// Batched backward pass: gradients of `sum_rows upstream_row . output_row`.
    ///
    /// Returns the parameter gradient (summed over rows) and the per-row input
    /// gradients.
    pub fn backward_batch(
        &self,
        input: ArrayView2<'_, f64>,
        upstream: ArrayView2<'_, f64>,
    ) -> (Vec<f64>, Array2<f64>) {
        let outs = self.forward_batch_cached(&input);
        self.backward_batch_from_caches(input, &outs, upstream)
    }

    /// Backward pass reusing the per-layer outputs of a prior
    /// [`forward_batch_cached`](Self::forward_batch_cached) call.
    pub(crate) fn backward_batch_from_caches(
        &self,
        input: ArrayView2<'_, f64>,
        outs: &[Array2<f64>],
        upstream: ArrayView2<'_, f64>,
    ) -> (Vec<f64>, Array2<f64>) {
        assert_eq!(input.ncols(), self.input_dim(), "backward_batch input width");
        assert_eq!(upstream.ncols(), self.output_dim(), "backward_batch upstream width");
        assert_eq!(input.nrows(), upstream.nrows(), "backward_batch row count");

        let mut wgrad = vec![0.0; self.weights.len()];
        let mut g = upstream.to_owned();

        let offsets: Vec<usize> = self
            .layers
            .iter()
            .scan(0usize, |acc, spec| {
                let off = *acc;
                *acc += spec.param_count();
                Some(off)
            })
            .collect();

        for idx in (0..self.layers.len()).rev() {
            let spec = &self.layers[idx];
            // dz = g * act'(y), elementwise on the post-activation output.
            if spec.activation != Activation::Linear {
                let y = &outs[idx];
                g.zip_mut_with(y, |gi, yi| *gi *= spec.activation.deriv_from_output(*yi));
            }

            let layer_input = if idx == 0 {
                input.view()
            } else {
                outs[idx - 1].view()
            };

            let wlen = spec.input_dim * spec.output_dim;
            let dw = g.t().dot(&layer_input); // (out, in), layout not guaranteed
            for (dst, src) in wgrad[offsets[idx]..offsets[idx] + wlen].iter_mut().zip(dw.iter()) {
                *dst = *src;
            }
            let db = g.sum_axis(Axis(0));
            for (dst, src) in wgrad[offsets[idx] + wlen..offsets[idx] + wlen + spec.output_dim]
                .iter_mut()
                .zip(db.iter())
            {
                *dst = *src;
            }

            let (w, _) = self.layer_params(idx);
            g = g.dot(&w); // (n, in)
        }

        (wgrad, g)
    }
}
