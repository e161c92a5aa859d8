//! Load-to-generation regression followed by a power flow.
//!
//! A sigmoid network predicts, for every generator in network order, its
//! active output and then its voltage setpoint, each as a fraction of its
//! box. The power flow holds those setpoints and lets the slack absorb the
//! mismatch. Cost is charged on the predicted generation, since that is
//! what the regression delivers; the cost implied by the recovered point is
//! kept alongside.

use std::time::Instant;

use crate::dataset::{Dataset, Sample};
use crate::mlp::{Architecture, TrainConfig};
use crate::network::{LoadProfile, Network};
use crate::opf::{generation_cost, implied_dispatch, GenDispatch, OperatingPoint};
use crate::solver::{solve_power_flow, SolverConfig};

use super::{check_fingerprint, fit, FitSummary, PipelineError, Regressor};

#[derive(Debug, Clone, PartialEq)]
pub struct BaselineModel {
    pub regressor: Regressor,
    pub net_fingerprint: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BaselinePrediction {
    /// Predicted active generation per bus.
    pub gen_p: Vec<f64>,
    /// Predicted voltage setpoints per bus (1 at buses without generators).
    pub v_set: Vec<f64>,
    pub predicted_cost: f64,
    /// Power-flow solution, `None` when it failed to converge.
    pub recovered: Option<OperatingPoint>,
    pub recovered_cost: Option<f64>,
    pub wall_time: f64,
}

fn fraction(x: f64, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        ((x - lo) / (hi - lo)).clamp(0.0, 1.0)
    } else {
        0.5
    }
}

fn targets(net: &Network, s: &Sample) -> Vec<f64> {
    let gens = net.generators();
    let buses = net.buses();
    let mut out: Vec<f64> = gens
        .iter()
        .map(|g| fraction(s.gen.p[g.bus], g.p_min, g.p_max))
        .collect();
    out.extend(gens.iter().map(|g| {
        let b = &buses[g.bus];
        fraction(s.point.v[g.bus], b.v_min, b.v_max)
    }));
    out
}

fn features(net: &Network, data: &Dataset) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    data.samples
        .iter()
        .map(|s| (s.load.to_features(), targets(net, s)))
        .unzip()
}

/// Trains the baseline with seed `cfg.seed + 2`.
pub fn baseline_train(
    net: &Network,
    train: &Dataset,
    test: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<(BaselineModel, FitSummary), PipelineError> {
    train.check_network(net)?;
    let (xs, ys) = features(net, train);
    let (tx, ty) = test.map(|t| features(net, t)).unwrap_or_default();
    let cfg = TrainConfig {
        seed: cfg.seed.wrapping_add(2),
        ..cfg.clone()
    };
    let (regressor, summary) = fit(&xs, &ys, Some((&tx, &ty)), &cfg, Architecture::SIGMOID)?;
    Ok((
        BaselineModel {
            regressor,
            net_fingerprint: net.fingerprint(),
        },
        summary,
    ))
}

pub fn baseline_predict(
    model: &BaselineModel,
    net: &Network,
    load: &LoadProfile,
    cfg: &SolverConfig,
) -> Result<BaselinePrediction, PipelineError> {
    check_fingerprint(net, &model.net_fingerprint)?;
    let t0 = Instant::now();
    let out = model.regressor.predict(&load.to_features())?;
    let n = net.n_bus();
    let gens = net.generators();
    let mut gen_p = vec![0.0; n];
    let mut v_set = vec![1.0; n];
    for (k, g) in gens.iter().enumerate() {
        let b = &net.buses()[g.bus];
        gen_p[g.bus] = g.p_min + out[k].clamp(0.0, 1.0) * (g.p_max - g.p_min);
        v_set[g.bus] = b.v_min + out[gens.len() + k].clamp(0.0, 1.0) * (b.v_max - b.v_min);
    }
    let predicted_cost = generation_cost(
        net,
        &GenDispatch {
            p: gen_p.clone(),
            q: vec![0.0; n],
        },
    );
    let recovered = solve_power_flow(net, load, &gen_p, &v_set, &OperatingPoint::flat(net), cfg).ok();
    let recovered_cost = recovered
        .as_ref()
        .map(|x| generation_cost(net, &implied_dispatch(net, x, load)));
    Ok(BaselinePrediction {
        gen_p,
        v_set,
        predicted_cost,
        recovered,
        recovered_cost,
        wall_time: t0.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fractions_clamp_and_handle_fixed_boxes() {
        assert_eq!(fraction(0.5, 0.0, 2.0), 0.25);
        assert_eq!(fraction(3.0, 0.0, 2.0), 1.0);
        assert_eq!(fraction(1.0, 1.0, 1.0), 0.5);
    }
}
