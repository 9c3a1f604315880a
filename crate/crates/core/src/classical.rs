//! Fully connected layers with ReLU/linear activations and exact
//! reverse-mode gradients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A predicted or true `(x, y)` position in meters.
pub type Coord = [f64; 2];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Linear,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Linear => z,
        }
    }

    /// Derivative at pre-activation `z`; the ReLU subgradient at 0 is 0.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Linear => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Linear => "linear",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "relu" => Some(Activation::Relu),
            "linear" => Some(Activation::Linear),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub in_dim: usize,
    pub out_dim: usize,
    /// Row-major `out_dim × in_dim`.
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        DenseLayer {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    /// Glorot-uniform weights in `±sqrt(6 / (fan_in + fan_out))`, zero bias.
    pub fn glorot<R: Rng + ?Sized>(
        in_dim: usize,
        out_dim: usize,
        activation: Activation,
        rng: &mut R,
    ) -> Self {
        let limit = (6.0 / (in_dim + out_dim) as f64).sqrt();
        let weights = (0..in_dim * out_dim)
            .map(|_| rng.random_range(-limit..=limit))
            .collect();
        DenseLayer {
            in_dim,
            out_dim,
            weights,
            bias: vec![0.0; out_dim],
            activation,
        }
    }

    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }

    fn pre_activation(&self, input: &[f64]) -> Vec<f64> {
        self.weights
            .chunks_exact(self.in_dim)
            .zip(&self.bias)
            .map(|(row, b)| row.iter().zip(input).map(|(w, v)| w * v).sum::<f64>() + b)
            .collect()
    }

    pub fn n_params(&self) -> usize {
        self.weights.len() + self.bias.len()
    }
}

/// Gradients for one layer, shaped like the layer's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerGrad {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseNet {
    layers: Vec<DenseLayer>,
}

/// Per-layer inputs and pre-activations recorded during a forward pass.
struct Trace {
    inputs: Vec<Vec<f64>>,
    pre: Vec<Vec<f64>>,
    output: Vec<f64>,
}

impl DenseNet {
    pub fn new(layers: Vec<DenseLayer>) -> Result<Self> {
        let last = layers.last().ok_or(Error::Empty("layer list"))?;
        if last.activation != Activation::Linear {
            return Err(Error::Layout("last layer must be linear".into()));
        }
        for (i, pair) in layers.windows(2).enumerate() {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::Layout(format!(
                    "layer {i} outputs {} values but layer {} expects {}",
                    pair[0].out_dim,
                    i + 1,
                    pair[1].in_dim
                )));
            }
        }
        for (i, l) in layers.iter().enumerate() {
            if l.in_dim == 0 || l.out_dim == 0 {
                return Err(Error::Layout(format!("layer {i} has a zero dimension")));
            }
            if l.weights.len() != l.in_dim * l.out_dim || l.bias.len() != l.out_dim {
                return Err(Error::Layout(format!("layer {i} parameter shapes are inconsistent")));
            }
        }
        Ok(DenseNet { layers })
    }

    /// Glorot-initialized net with ReLU hidden layers and a linear output,
    /// e.g. `dims = [3, 32, 2]`.
    pub fn mlp<R: Rng + ?Sized>(dims: &[usize], rng: &mut R) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Layout("need at least input and output dimensions".into()));
        }
        let n = dims.len() - 1;
        let layers = dims
            .windows(2)
            .enumerate()
            .map(|(i, d)| {
                let act = if i + 1 == n {
                    Activation::Linear
                } else {
                    Activation::Relu
                };
                DenseLayer::glorot(d[0], d[1], act, rng)
            })
            .collect();
        DenseNet::new(layers)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(DenseLayer::n_params).sum()
    }

    /// Parameters flattened layer by layer, weights (row-major) before bias.
    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.bias);
        }
        out
    }

    pub fn set_params(&mut self, flat: &[f64]) -> Result<()> {
        Error::check_len("network parameters", self.n_params(), flat.len())?;
        let mut offset = 0;
        for l in &mut self.layers {
            let nw = l.weights.len();
            l.weights.copy_from_slice(&flat[offset..offset + nw]);
            offset += nw;
            let nb = l.bias.len();
            l.bias.copy_from_slice(&flat[offset..offset + nb]);
            offset += nb;
        }
        Ok(())
    }

    fn trace(&self, v: &[f64]) -> Result<Trace> {
        Error::check_len("network input", self.input_dim(), v.len())?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut current = v.to_vec();
        for l in &self.layers {
            let z = l.pre_activation(&current);
            let a = z.iter().map(|&zi| l.activation.apply(zi)).collect();
            inputs.push(std::mem::replace(&mut current, a));
            pre.push(z);
        }
        Ok(Trace {
            inputs,
            pre,
            output: current,
        })
    }

    pub fn forward(&self, v: &[f64]) -> Result<Vec<f64>> {
        Ok(self.trace(v)?.output)
    }

    /// Gradients of a scalar loss given `upstream = dL/d(output)`.
    /// Returns per-layer parameter gradients and `dL/dv`.
    pub fn backward(&self, v: &[f64], upstream: &[f64]) -> Result<(Vec<LayerGrad>, Vec<f64>)> {
        let trace = self.trace(v)?;
        self.backward_from(&trace, upstream)
    }

    /// Forward pass plus backward pass in one go; `upstream_of` maps the
    /// network output to `dL/d(output)`.
    pub fn forward_backward(
        &self,
        v: &[f64],
        upstream_of: impl FnOnce(&[f64]) -> Vec<f64>,
    ) -> Result<(Vec<f64>, Vec<LayerGrad>, Vec<f64>)> {
        let trace = self.trace(v)?;
        let upstream = upstream_of(&trace.output);
        let (grads, input_grad) = self.backward_from(&trace, &upstream)?;
        Ok((trace.output, grads, input_grad))
    }

    fn backward_from(&self, trace: &Trace, upstream: &[f64]) -> Result<(Vec<LayerGrad>, Vec<f64>)> {
        Error::check_len("upstream gradient", self.output_dim(), upstream.len())?;
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta_out = upstream.to_vec();
        for (idx, l) in self.layers.iter().enumerate().rev() {
            let input = &trace.inputs[idx];
            let delta: Vec<f64> = delta_out
                .iter()
                .zip(&trace.pre[idx])
                .map(|(d, &z)| d * l.activation.derivative(z))
                .collect();
            let mut wg = vec![0.0; l.weights.len()];
            for (r, d) in delta.iter().enumerate() {
                for (c, x) in input.iter().enumerate() {
                    wg[r * l.in_dim + c] = d * x;
                }
            }
            let mut input_grad = vec![0.0; l.in_dim];
            for (r, d) in delta.iter().enumerate() {
                for (c, g) in input_grad.iter_mut().enumerate() {
                    *g += l.weight(r, c) * d;
                }
            }
            grads.push(LayerGrad {
                weights: wg,
                bias: delta,
            });
            delta_out = input_grad;
        }
        grads.reverse();
        Ok((grads, delta_out))
    }
}

/// Flatten layer gradients in the same order as [`DenseNet::params`].
pub fn flatten_grads(grads: &[LayerGrad]) -> Vec<f64> {
    grads
        .iter()
        .flat_map(|g| g.weights.iter().chain(&g.bias).copied())
        .collect()
}

/// `(1/n) Σ [(x̂ − x)² + (ŷ − y)²]`.
pub fn mse_loss(pred: &[Coord], truth: &[Coord]) -> Result<f64> {
    if pred.is_empty() {
        return Err(Error::Empty("prediction set"));
    }
    Error::check_len("truth set", pred.len(), truth.len())?;
    let total: f64 = pred
        .iter()
        .zip(truth)
        .map(|(p, t)| (p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2))
        .sum();
    Ok(total / pred.len() as f64)
}
