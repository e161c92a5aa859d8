//! Small dense feed-forward networks: forward pass, backpropagation,
//! mini-batch training and a versioned file format.

mod io;
mod scaler;
mod train;

pub use io::{load, save, FORMAT_VERSION};
pub use scaler::{Scaler, ScalerPair};
pub use train::{train, Architecture, LossHistory, Optimizer, TrainConfig, TrainedModel};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MlpError {
    #[error("expected input of length {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("training diverged at epoch {0}")]
    Diverged(usize),
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("model format version {found} is newer than supported version {supported}")]
    Version { found: u64, supported: u64 },
    #[error("corrupt model payload: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Sigmoid,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputActivation {
    Linear,
    Sigmoid,
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
        }
    }

    /// Derivative expressed through the pre-activation.
    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

impl OutputActivation {
    fn apply(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => z,
            OutputActivation::Sigmoid => sigmoid(z),
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            OutputActivation::Linear => 1.0,
            OutputActivation::Sigmoid => {
                let s = sigmoid(z);
                s * (1.0 - s)
            }
        }
    }
}

/// Weights and biases of a fully connected network. Layer `l` maps
/// `layer_dims[l]` inputs to `layer_dims[l + 1]` outputs; its weight matrix
/// is stored row-major with one row per output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    pub layer_dims: Vec<usize>,
    pub activation: Activation,
    pub output_activation: OutputActivation,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Gradients laid out like [`MlpParams::weights`] and [`MlpParams::biases`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(p: &MlpParams) -> Self {
        Self {
            weights: p.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: p.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }
}

fn flatten(w: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<f64> {
    let mut out = Vec::new();
    for (wl, bl) in w.iter().zip(b) {
        out.extend_from_slice(wl);
        out.extend_from_slice(bl);
    }
    out
}

impl MlpParams {
    /// Random initialization: He scaling for ReLU hidden layers, Xavier
    /// otherwise; biases start at zero.
    pub fn init<R: Rng>(
        layer_dims: &[usize],
        activation: Activation,
        output_activation: OutputActivation,
        rng: &mut R,
    ) -> Result<Self, MlpError> {
        if layer_dims.len() < 2 || layer_dims.iter().any(|&d| d == 0) {
            return Err(MlpError::Shape(format!("invalid layer sizes {layer_dims:?}")));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_dims.len() - 1 {
            let (fan_in, fan_out) = (layer_dims[l], layer_dims[l + 1]);
            let hidden = l + 2 < layer_dims.len();
            let var = if hidden && activation == Activation::Relu {
                2.0 / fan_in as f64
            } else {
                2.0 / (fan_in + fan_out) as f64
            };
            let normal = Normal::new(0.0, var.sqrt()).unwrap();
            weights.push((0..fan_in * fan_out).map(|_| normal.sample(rng)).collect());
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            activation,
            output_activation,
            weights,
            biases,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn n_layers(&self) -> usize {
        self.layer_dims.len() - 1
    }

    pub fn num_params(&self) -> usize {
        self.weights.iter().map(Vec::len).sum::<usize>() + self.biases.iter().map(Vec::len).sum::<usize>()
    }

    /// Every parameter, layer by layer, weights before biases.
    pub fn to_flat(&self) -> Vec<f64> {
        flatten(&self.weights, &self.biases)
    }

    /// Inverse of [`MlpParams::to_flat`].
    pub fn set_flat(&mut self, flat: &[f64]) -> Result<(), MlpError> {
        if flat.len() != self.num_params() {
            return Err(MlpError::Dimension {
                expected: self.num_params(),
                got: flat.len(),
            });
        }
        let mut k = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let (nw, nb) = (w.len(), b.len());
            w.copy_from_slice(&flat[k..k + nw]);
            k += nw;
            b.copy_from_slice(&flat[k..k + nb]);
            k += nb;
        }
        Ok(())
    }

    /// Checks that stored shapes agree with `layer_dims`.
    pub fn check_shapes(&self) -> Result<(), MlpError> {
        let l = self.layer_dims.len();
        if l < 2 || self.weights.len() != l - 1 || self.biases.len() != l - 1 {
            return Err(MlpError::Shape("layer count".into()));
        }
        for i in 0..l - 1 {
            let (a, b) = (self.layer_dims[i], self.layer_dims[i + 1]);
            if a == 0 || b == 0 || self.weights[i].len() != a * b || self.biases[i].len() != b {
                return Err(MlpError::Shape(format!("layer {i}")));
            }
        }
        Ok(())
    }

    fn layer_activation(&self, l: usize, z: f64) -> f64 {
        if l + 1 == self.n_layers() {
            self.output_activation.apply(z)
        } else {
            self.activation.apply(z)
        }
    }

    fn layer_derivative(&self, l: usize, z: f64) -> f64 {
        if l + 1 == self.n_layers() {
            self.output_activation.derivative(z)
        } else {
            self.activation.derivative(z)
        }
    }

    /// Pre-activations and activations of every layer; `acts[0]` is the input.
    fn forward_trace(&self, x: &[f64]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut pre = Vec::with_capacity(self.n_layers());
        let mut acts = Vec::with_capacity(self.n_layers() + 1);
        acts.push(x.to_vec());
        for l in 0..self.n_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let w = &self.weights[l];
            let input = &acts[l];
            let z: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &w[o * n_in..(o + 1) * n_in];
                    self.biases[l][o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>()
                })
                .collect();
            let a = z.iter().map(|&v| self.layer_activation(l, v)).collect();
            pre.push(z);
            acts.push(a);
        }
        (pre, acts)
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if x.len() != self.input_dim() {
            return Err(MlpError::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let (_, mut acts) = self.forward_trace(x);
        Ok(acts.pop().unwrap())
    }

    /// Mean over samples of the summed squared error, and its gradient.
    pub fn loss_and_gradient(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<(f64, Gradients), MlpError> {
        check_pairs(xs, ys, self.input_dim(), self.output_dim())?;
        let mut grad = Gradients::zeros_like(self);
        let mut loss = 0.0;
        let scale = 1.0 / xs.len() as f64;
        for (x, y) in xs.iter().zip(ys) {
            loss += self.accumulate(x, y, scale, &mut grad);
        }
        Ok((loss * scale, grad))
    }

    /// Adds `scale` times this sample's gradient into `grad`; returns the
    /// sample's squared error.
    fn accumulate(&self, x: &[f64], y: &[f64], scale: f64, grad: &mut Gradients) -> f64 {
        let (pre, acts) = self.forward_trace(x);
        let last = self.n_layers() - 1;
        let out = &acts[last + 1];
        let mut err = 0.0;
        let mut delta: Vec<f64> = out
            .iter()
            .zip(y)
            .zip(&pre[last])
            .map(|((p, t), z)| {
                err += (p - t) * (p - t);
                2.0 * (p - t) * self.layer_derivative(last, *z) * scale
            })
            .collect();
        for l in (0..self.n_layers()).rev() {
            let n_in = self.layer_dims[l];
            let input = &acts[l];
            for (o, d) in delta.iter().enumerate() {
                grad.biases[l][o] += d;
                let row = &mut grad.weights[l][o * n_in..(o + 1) * n_in];
                for (g, a) in row.iter_mut().zip(input) {
                    *g += d * a;
                }
            }
            if l > 0 {
                let w = &self.weights[l];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = delta.iter().enumerate().map(|(o, d)| d * w[o * n_in + i]).sum();
                        back * self.layer_derivative(l - 1, pre[l - 1][i])
                    })
                    .collect();
            }
        }
        err
    }
}

fn check_pairs(xs: &[Vec<f64>], ys: &[Vec<f64>], n_in: usize, n_out: usize) -> Result<(), MlpError> {
    if xs.len() != ys.len() || xs.is_empty() {
        return Err(MlpError::Shape(format!("{} inputs for {} targets", xs.len(), ys.len())));
    }
    for x in xs {
        if x.len() != n_in {
            return Err(MlpError::Dimension {
                expected: n_in,
                got: x.len(),
            });
        }
    }
    for y in ys {
        if y.len() != n_out {
            return Err(MlpError::Dimension {
                expected: n_out,
                got: y.len(),
            });
        }
    }
    Ok(())
}

/// `(1/N) * sum_i ||target_i - pred_i||^2`.
pub fn mse_loss(pred: &[Vec<f64>], target: &[Vec<f64>]) -> Result<f64, MlpError> {
    if pred.len() != target.len() || pred.is_empty() {
        return Err(MlpError::Shape(format!(
            "{} predictions for {} targets",
            pred.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(target) {
        if p.len() != t.len() {
            return Err(MlpError::Shape(format!("row of {} vs {}", p.len(), t.len())));
        }
        total += p.iter().zip(t).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
    }
    Ok(total / pred.len() as f64)
}
