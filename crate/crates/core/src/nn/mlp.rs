use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Outputs are clamped into `[EPS, 1 - EPS]` so that every log in the
/// losses stays finite.
pub const EPS: f64 = 1e-7;

/// Fully connected layer, `weights` stored row-major as `outputs × inputs`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.extend(self.weights.chunks_exact(self.inputs).zip(&self.bias).map(|(row, b)| {
            row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + b
        }));
    }
}

/// Feed-forward network with rectifier hidden layers and a single logistic
/// output unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

/// Activations recorded by a forward pass, consumed by [`Mlp::backward`].
#[derive(Debug, Clone)]
pub struct Trace {
    /// `activations[0]` is the input; `activations[k]` the output of layer `k-1`.
    activations: Vec<Vec<f64>>,
    /// Pre-activation of the output unit.
    logit: f64,
    /// Logistic output before clamping.
    raw: f64,
}

impl Trace {
    /// Clamped network output.
    pub fn output(&self) -> f64 {
        self.raw.clamp(EPS, 1.0 - EPS)
    }

    /// Unclamped logistic output.
    pub fn probability(&self) -> f64 {
        self.raw
    }

    pub fn logit(&self) -> f64 {
        self.logit
    }

    fn clamped(&self) -> bool {
        self.raw <= EPS || self.raw >= 1.0 - EPS
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 || dims.contains(&0) || dims[dims.len() - 1] != 1 {
        return Err(Error::InvalidConfig(format!(
            "layer dims {dims:?} must be positive and end in 1"
        )));
    }
    Ok(())
}

impl Mlp {
    /// Uniform fan-in initialization: weights and biases in `±1/√fan_in`.
    pub fn new<R: Rng>(dims: &[usize], rng: &mut R) -> Result<Self> {
        let mut mlp = Self::zeros(dims)?;
        for layer in &mut mlp.layers {
            let bound = 1.0 / (layer.inputs as f64).sqrt();
            for w in layer.weights.iter_mut().chain(layer.bias.iter_mut()) {
                *w = rng.gen_range(-bound..bound);
            }
        }
        Ok(mlp)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self> {
        check_dims(dims)?;
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim())
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.bias.len()).sum()
    }

    /// Every parameter in a fixed order: per layer, weights then bias.
    pub fn params(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    /// Validates structural consistency, e.g. after deserializing.
    pub fn validate(&self) -> Result<()> {
        check_dims(&self.dims())?;
        for (k, l) in self.layers.iter().enumerate() {
            if l.weights.len() != l.inputs * l.outputs || l.bias.len() != l.outputs {
                return Err(Error::InvalidConfig(format!("layer {k} has inconsistent shapes")));
            }
            if k > 0 && self.layers[k - 1].outputs != l.inputs {
                return Err(Error::InvalidConfig(format!("layer {k} input does not match previous output")));
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<f64> {
        Ok(self.trace(x)?.output())
    }

    pub fn trace(&self, x: &[f64]) -> Result<Trace> {
        if x.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (k, layer) in self.layers.iter().enumerate() {
            let mut out = Vec::with_capacity(layer.outputs);
            layer.affine(&activations[k], &mut out);
            if k < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            }
            activations.push(out);
        }
        let z = activations[last + 1][0];
        let raw = sigmoid(z);
        activations[last + 1][0] = raw;
        Ok(Trace { activations, logit: z, raw })
    }

    /// Backpropagates `d_output` (the derivative of a scalar loss with
    /// respect to the clamped output) and accumulates parameter gradients
    /// into `grads`. Returns the derivative with respect to the input.
    ///
    /// A clamped output has zero derivative.
    pub fn backward(&self, trace: &Trace, d_output: f64, grads: &mut Gradients) -> Vec<f64> {
        if trace.clamped() {
            return vec![0.0; self.input_dim()];
        }
        self.backward_logit(trace, d_output * trace.raw * (1.0 - trace.raw), grads)
    }

    /// Like [`Mlp::backward`], but `d_logit` is the derivative with respect
    /// to the output unit's pre-activation. Losses written in terms of the
    /// logit keep their gradient where the logistic output saturates.
    pub fn backward_logit(&self, trace: &Trace, d_logit: f64, grads: &mut Gradients) -> Vec<f64> {
        let mut delta = vec![d_logit];
        for k in (0..self.layers.len()).rev() {
            let layer = &self.layers[k];
            let input = &trace.activations[k];
            let g = &mut grads.layers[k];
            for (o, &d) in delta.iter().enumerate() {
                g.bias[o] += d;
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (w, &a) in row.iter_mut().zip(input) {
                    *w += d * a;
                }
            }
            let mut prev = vec![0.0; layer.inputs];
            for (o, &d) in delta.iter().enumerate() {
                let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (p, &w) in prev.iter_mut().zip(row) {
                    *p += d * w;
                }
            }
            if k > 0 {
                // rectifier derivative; activations are post-ReLU
                for (p, &a) in prev.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }
        delta
    }
}

/// Parameter-shaped gradient (or moment) buffer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn values(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(l.bias.iter()))
    }

    pub fn values_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers
            .iter_mut()
            .flat_map(|l| l.weights.iter_mut().chain(l.bias.iter_mut()))
    }

    pub fn scale(&mut self, by: f64) {
        self.values_mut().for_each(|v| *v *= by);
    }

    pub fn is_zero(&self) -> bool {
        self.values().all(|&v| v == 0.0)
    }

    pub fn same_shape(&self, model: &Mlp) -> bool {
        self.layers.len() == model.layers.len()
            && self
                .layers
                .iter()
                .zip(&model.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.bias.len() == l.bias.len())
    }
}
