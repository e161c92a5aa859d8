//! Learned warm starts: a dual network maps load to balance multipliers, a
//! Lagrangian network maps load and multipliers to the partial-Lagrangian
//! minimizer, and the predicted point seeds the ACOPF solve. Also holds the
//! load-to-generation regression baseline and the evaluation harness.
//!
//! Feature layouts: a load is `[p..., q...]` (2n), multipliers are
//! `[mu_p..., mu_q...]` (2n), and an operating point is `[v..., theta...]`
//! with the slack angle left out (2n - 1).

mod baseline;
mod bundle;
mod eval;

pub use baseline::{baseline_predict, baseline_train, BaselineModel, BaselinePrediction};
pub use bundle::{ModelBundle, BUNDLE_VERSION};
pub use eval::{
    evaluate, sweep_local_fraction, sweep_plot_csv, EvalConfig, EvalReport, EvalSummary, InstanceRecord, SweepConfig,
    SweepPoint,
};

use std::collections::HashMap;
use std::time::Instant;

use rayon::prelude::*;
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Sample};
use crate::mlp::{self, Architecture, LossHistory, MlpError, MlpParams, ScalerPair, TrainConfig};
use crate::network::{LoadProfile, Network};
use crate::opf::{DualVector, OperatingPoint};
use crate::solver::{solve_acopf, solve_partial_lagrangian, SolveResult, SolverConfig, SolverError, StartKind};

/// Training aborts when more partial-Lagrangian solves than this fail.
pub const MAX_TARGET_FAILURE_RATE: f64 = 0.05;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Mlp(#[from] MlpError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("model was trained for network {found}, expected {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("{failed} of {total} partial-Lagrangian solves failed; first failure: {first}")]
    TargetFailures { failed: usize, total: usize, first: String },
    #[error("empty training set")]
    Empty,
    #[error("model bundle: {0}")]
    Bundle(String),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

/// A trained network together with its feature scalers.
#[derive(Debug, Clone, PartialEq)]
pub struct Regressor {
    pub params: MlpParams,
    pub scalers: ScalerPair,
}

impl Regressor {
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

    /// Mean squared error in original units.
    pub fn mse(&self, xs: &[Vec<f64>], ys: &[Vec<f64>]) -> Result<f64, MlpError> {
        let pred = xs.iter().map(|x| self.predict(x)).collect::<Result<Vec<_>, _>>()?;
        mlp::mse_loss(&pred, ys)
    }
}

impl From<mlp::TrainedModel> for Regressor {
    fn from(m: mlp::TrainedModel) -> Self {
        Self {
            params: m.params,
            scalers: m.scalers,
        }
    }
}

/// Loss history and errors of one trained network.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSummary {
    pub history: LossHistory,
    pub train_mse: f64,
    pub test_mse: Option<f64>,
}

/// Trains with the batch size capped at the sample count.
pub(crate) fn fit(
    xs: &[Vec<f64>],
    ys: &[Vec<f64>],
    test: Option<(&[Vec<f64>], &[Vec<f64>])>,
    cfg: &TrainConfig,
    arch: Architecture,
) -> Result<(Regressor, FitSummary), PipelineError> {
    if xs.is_empty() {
        return Err(PipelineError::Empty);
    }
    let cfg = TrainConfig {
        batch_size: cfg.batch_size.min(xs.len()),
        ..cfg.clone()
    };
    let model = mlp::train(xs, ys, &cfg, arch)?;
    let history = model.history.clone();
    let reg = Regressor::from(model);
    let train_mse = reg.mse(xs, ys)?;
    let test_mse = match test {
        Some((tx, ty)) if !tx.is_empty() => Some(reg.mse(tx, ty)?),
        _ => None,
    };
    Ok((
        reg,
        FitSummary {
            history,
            train_mse,
            test_mse,
        },
    ))
}

fn dual_features(samples: &[Sample]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    samples
        .iter()
        .map(|s| (s.load.to_features(), s.duals.to_features()))
        .unzip()
}

/// Fits load -> multipliers with ReLU hidden layers and a linear output.
pub fn train_dual_net(
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(Regressor, FitSummary), PipelineError> {
    let (xs, ys) = dual_features(&train.samples);
    let (tx, ty) = test.map(|t| dual_features(&t.samples)).unwrap_or_default();
    fit(&xs, &ys, Some((&tx, &ty)), cfg, Architecture::REGRESSION)
}

fn cache_key(load: &LoadProfile, mu: &DualVector) -> Vec<u64> {
    load.to_features()
        .iter()
        .chain(&mu.to_features())
        .map(|v| v.to_bits())
        .collect()
}

/// Partial-Lagrangian minimizers keyed by the exact (load, multiplier)
/// pair, so repeated training on overlapping datasets solves each once.
#[derive(Debug, Default)]
pub struct TargetCache {
    map: HashMap<Vec<u64>, Result<OperatingPoint, String>>,
}

impl TargetCache {
    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Minimizers for every sample, solved from the flat start.
    pub fn targets(
        &mut self,
        net: &Network,
        samples: &[Sample],
        cfg: &SolverConfig,
    ) -> Vec<Result<OperatingPoint, String>> {
        let missing: Vec<&Sample> = {
            let mut seen = std::collections::HashSet::new();
            samples
                .iter()
                .filter(|s| {
                    let k = cache_key(&s.load, &s.duals);
                    !self.map.contains_key(&k) && seen.insert(k)
                })
                .collect()
        };
        let flat = OperatingPoint::flat(net);
        let solved: Vec<_> = missing
            .par_iter()
            .map(|s| {
                let r = solve_partial_lagrangian(net, &s.load, &s.duals, &flat, cfg)
                    .map(|(x, _)| x)
                    .map_err(|e| e.to_string());
                (cache_key(&s.load, &s.duals), r)
            })
            .collect();
        self.map.extend(solved);
        samples
            .iter()
            .map(|s| self.map[&cache_key(&s.load, &s.duals)].clone())
            .collect()
    }
}

fn lagrangian_features(
    net: &Network,
    samples: &[Sample],
    targets: &[Result<OperatingPoint, String>],
) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    samples
        .iter()
        .zip(targets)
        .filter_map(|(s, t)| {
            let x = t.as_ref().ok()?;
            let mut input = s.load.to_features();
            input.extend(s.duals.to_features());
            Some((input, x.to_features(net.slack())))
        })
        .unzip()
}

/// Fits (load, multipliers) -> partial-Lagrangian minimizer. Targets are
/// recomputed with `solver_cfg` rather than read from the dataset.
pub fn train_lagrangian_net(
    net: &Network,
    train: &Dataset,
    test: Option<&Dataset>,
    solver_cfg: &SolverConfig,
    cfg: &TrainConfig,
    cache: &mut TargetCache,
) -> Result<(Regressor, FitSummary), PipelineError> {
    let targets = cache.targets(net, &train.samples, solver_cfg);
    let failures: Vec<&String> = targets.iter().filter_map(|t| t.as_ref().err()).collect();
    if failures.len() as f64 > MAX_TARGET_FAILURE_RATE * train.samples.len() as f64 {
        return Err(PipelineError::TargetFailures {
            failed: failures.len(),
            total: train.samples.len(),
            first: failures[0].clone(),
        });
    }
    let (xs, ys) = lagrangian_features(net, &train.samples, &targets);
    let (tx, ty) = match test {
        Some(t) => {
            let tt = cache.targets(net, &t.samples, solver_cfg);
            lagrangian_features(net, &t.samples, &tt)
        }
        None => Default::default(),
    };
    fit(&xs, &ys, Some((&tx, &ty)), cfg, Architecture::REGRESSION)
}

/// Both trained networks and the network they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedPipeline {
    pub dual_net: Regressor,
    pub lagrangian_net: Regressor,
    pub net_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineTraining {
    pub dual: FitSummary,
    pub lagrangian: FitSummary,
}

/// Trains both networks. The Lagrangian network uses seed `cfg.seed + 1`.
pub fn train_pipeline(
    net: &Network,
    train: &Dataset,
    test: Option<&Dataset>,
    solver_cfg: &SolverConfig,
    cfg: &TrainConfig,
    cache: &mut TargetCache,
) -> Result<(TrainedPipeline, PipelineTraining), PipelineError> {
    train.check_network(net)?;
    let (dual_net, dual) = train_dual_net(train, test, cfg)?;
    let lag_cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(1),
        ..cfg.clone()
    };
    let (lagrangian_net, lagrangian) = train_lagrangian_net(net, train, test, solver_cfg, &lag_cfg, cache)?;
    Ok((
        TrainedPipeline {
            dual_net,
            lagrangian_net,
            net_fingerprint: net.fingerprint(),
        },
        PipelineTraining { dual, lagrangian },
    ))
}

pub(crate) fn check_fingerprint(expected_for: &Network, found: &str) -> Result<(), PipelineError> {
    let expected = expected_for.fingerprint();
    if expected != found {
        return Err(PipelineError::Fingerprint {
            expected,
            found: found.to_string(),
        });
    }
    Ok(())
}

impl TrainedPipeline {
    pub fn predict_duals(&self, net: &Network, load: &LoadProfile) -> Result<DualVector, PipelineError> {
        check_fingerprint(net, &self.net_fingerprint)?;
        Ok(DualVector::from_features(&self.dual_net.predict(&load.to_features())?))
    }

    /// Predicted multipliers, then the predicted Lagrangian minimizer with
    /// the slack angle at zero and magnitudes clipped into bounds.
    pub fn predict_warm_start(&self, net: &Network, load: &LoadProfile) -> Result<OperatingPoint, PipelineError> {
        let mu = self.predict_duals(net, load)?;
        let mut input = load.to_features();
        input.extend(mu.to_features());
        let out = self.lagrangian_net.predict(&input)?;
        let mut x = OperatingPoint::from_features(&out, net.n_bus(), net.slack());
        x.clip_voltages(net);
        Ok(x.normalized(net.slack()))
    }
}

/// Predicts a warm start and solves from it. The reported wall time
/// includes the prediction.
pub fn solve_with_warm_start(
    net: &Network,
    load: &LoadProfile,
    pipeline: &TrainedPipeline,
    cfg: &SolverConfig,
) -> Result<SolveResult, PipelineError> {
    let t0 = Instant::now();
    let init = pipeline.predict_warm_start(net, load)?;
    let mut r = solve_acopf(net, load, &init, cfg)?;
    r.start = StartKind::Learned;
    r.wall_time = t0.elapsed().as_secs_f64();
    Ok(r)
}
