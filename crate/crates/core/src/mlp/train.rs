use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_pairs, Activation, Gradients, MlpError, MlpParams, OutputActivation, Scaler, ScalerPair};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    Sgd,
    #[default]
    Adam,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub hidden_width: usize,
    pub hidden_layers: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            hidden_width: 64,
            hidden_layers: 2,
            epochs: 200,
            batch_size: 32,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            seed: 0,
            validation_fraction: 0.0,
        }
    }
}

impl TrainConfig {
    /// Width 64 up to 40 buses, 128 above.
    pub fn default_width(n_bus: usize) -> usize {
        if n_bus <= 40 {
            64
        } else {
            128
        }
    }

    pub fn validate(&self) -> Result<(), MlpError> {
        let bad = |m: &str| Err(MlpError::Config(m.into()));
        if self.hidden_width == 0 || self.hidden_layers == 0 {
            return bad("hidden_width and hidden_layers must be positive");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("adam betas must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) {
            return bad("epsilon must be positive");
        }
        if !(0.0..=0.5).contains(&self.validation_fraction) {
            return bad("validation_fraction must lie in [0, 0.5]");
        }
        Ok(())
    }
}

/// Hidden and output activations of a network to train.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Architecture {
    pub activation: Activation,
    pub output_activation: OutputActivation,
}

impl Architecture {
    /// ReLU hidden layers, linear output.
    pub const REGRESSION: Self = Self {
        activation: Activation::Relu,
        output_activation: OutputActivation::Linear,
    };
    /// Sigmoid everywhere, for targets that are fractions in [0, 1].
    pub const SIGMOID: Self = Self {
        activation: Activation::Sigmoid,
        output_activation: OutputActivation::Sigmoid,
    };
}

/// Mean squared loss on scaled targets after each epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LossHistory {
    pub train: Vec<f64>,
    pub validation: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub params: MlpParams,
    pub scalers: ScalerPair,
    pub history: LossHistory,
}

impl TrainedModel {
    /// Prediction in original units.
    pub fn predict(&self, x: &[f64]) -> Result<Vec<f64>, MlpError> {
        if x.len() != self.scalers.input.dim() {
            return Err(MlpError::Dimension {
                expected: self.scalers.input.dim(),
                got: x.len(),
            });
        }
        let z = self.params.forward(&self.scalers.input.apply(x))?;
        Ok(self.scalers.target.invert(&z))
    }
}

/// An epoch may raise the training loss by at most this factor; otherwise
/// it is undone and retried with half the learning rate.
const ALLOWED_RISE: f64 = 1.05;
const MAX_RETRIES: usize = 8;

struct AdamState {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

fn step(params: &mut MlpParams, grad: &Gradients, cfg: &TrainConfig, lr: f64, adam: &mut AdamState) {
    let g = grad.to_flat();
    let mut w = params.to_flat();
    match cfg.optimizer {
        Optimizer::Sgd => {
            for (wi, gi) in w.iter_mut().zip(&g) {
                *wi -= lr * gi;
            }
        }
        Optimizer::Adam => {
            adam.t += 1;
            let c1 = 1.0 - cfg.beta1.powi(adam.t);
            let c2 = 1.0 - cfg.beta2.powi(adam.t);
            for k in 0..w.len() {
                adam.m[k] = cfg.beta1 * adam.m[k] + (1.0 - cfg.beta1) * g[k];
                adam.v[k] = cfg.beta2 * adam.v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
                let mh = adam.m[k] / c1;
                let vh = adam.v[k] / c2;
                w[k] -= lr * mh / (vh.sqrt() + cfg.epsilon);
            }
        }
    }
    params.set_flat(&w).expect("same parameter count");
}

/// Mini-batch training on standardized inputs and targets.
///
/// Targets of a sigmoid-output network are left unscaled so they stay in
/// the range of the output layer. Samples are shuffled once with `seed`;
/// the last `validation_fraction` of them is held out. An epoch that raises
/// the training loss by more than 5% is rolled back and retried at half the
/// learning rate, so the recorded history never rises by more than that.
pub fn train(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    cfg: &TrainConfig,
    arch: Architecture,
) -> Result<TrainedModel, MlpError> {
    cfg.validate()?;
    let (n_in, n_out) = match (xs.first(), ys.first()) {
        (Some(x), Some(y)) => (x.len(), y.len()),
        _ => return Err(MlpError::Shape("no training samples".into())),
    };
    check_pairs(xs, ys, n_in, n_out)?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut dims = vec![n_in];
    dims.extend(std::iter::repeat_n(cfg.hidden_width, cfg.hidden_layers));
    dims.push(n_out);
    let mut params = MlpParams::init(&dims, arch.activation, arch.output_activation, &mut rng)?;

    let mut order: Vec<usize> = (0..xs.len()).collect();
    let mut shuffle_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    shuffle_rng.set_stream(1);
    order.shuffle(&mut shuffle_rng);
    let n_val = (xs.len() as f64 * cfg.validation_fraction).floor() as usize;
    let (train_idx, val_idx) = order.split_at(xs.len() - n_val);
    if train_idx.len() < cfg.batch_size {
        return Err(MlpError::Config(format!(
            "{} training samples is fewer than batch_size {}",
            train_idx.len(),
            cfg.batch_size
        )));
    }

    let pick = |idx: &[usize], v: &[Vec<f64>]| -> Vec<Vec<f64>> { idx.iter().map(|&i| v[i].clone()).collect() };
    let train_x = pick(train_idx, xs);
    let train_y = pick(train_idx, ys);
    let input = Scaler::fit(&train_x)?;
    let target = match arch.output_activation {
        OutputActivation::Linear => Scaler::fit(&train_y)?,
        OutputActivation::Sigmoid => Scaler::identity(n_out),
    };
    let scale_all = |v: Vec<Vec<f64>>, s: &Scaler| -> Vec<Vec<f64>> { v.iter().map(|r| s.apply(r)).collect() };
    let tx = scale_all(train_x, &input);
    let ty = scale_all(train_y, &target);
    let vx = scale_all(pick(val_idx, xs), &input);
    let vy = scale_all(pick(val_idx, ys), &target);

    let mut adam = AdamState {
        m: vec![0.0; params.num_params()],
        v: vec![0.0; params.num_params()],
        t: 0,
    };
    let mut history = LossHistory::default();
    let mut batch_order: Vec<usize> = (0..tx.len()).collect();
    let mut bx = Vec::with_capacity(cfg.batch_size);
    let mut by = Vec::with_capacity(cfg.batch_size);
    let mut lr = cfg.learning_rate;
    for epoch in 0..cfg.epochs {
        let prev = history.train.last().copied();
        let saved = (params.clone(), adam.m.clone(), adam.v.clone(), adam.t);
        let mut loss = f64::INFINITY;
        for _ in 0..MAX_RETRIES {
            batch_order.shuffle(&mut shuffle_rng);
            for chunk in batch_order.chunks(cfg.batch_size) {
                bx.clear();
                by.clear();
                for &i in chunk {
                    bx.push(tx[i].clone());
                    by.push(ty[i].clone());
                }
                let (batch_loss, grad) = params.loss_and_gradient(&bx, &by)?;
                if !batch_loss.is_finite() {
                    return Err(MlpError::Diverged(epoch));
                }
                step(&mut params, &grad, cfg, lr, &mut adam);
            }
            loss = params.loss_and_gradient(&tx, &ty)?.0;
            if !loss.is_finite() || params.to_flat().iter().any(|w| !w.is_finite()) {
                return Err(MlpError::Diverged(epoch));
            }
            match prev {
                Some(p) if loss > ALLOWED_RISE * p => {
                    // Undo the epoch and retry it with a smaller step.
                    params = saved.0.clone();
                    adam.m.clone_from(&saved.1);
                    adam.v.clone_from(&saved.2);
                    adam.t = saved.3;
                    lr *= 0.5;
                    loss = p;
                }
                _ => break,
            }
        }
        history.train.push(loss);
        if !vx.is_empty() {
            history.validation.push(params.loss_and_gradient(&vx, &vy)?.0);
        }
    }
    Ok(TrainedModel {
        params,
        scalers: ScalerPair { input, target },
        history,
    })
}
