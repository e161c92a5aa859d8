use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::network::{LoadProfile, Network};
use crate::opf::OperatingPoint;

use super::{solve_acopf, RandomStart, SolveResult, SolverConfig, SolverError, StartKind};

const COST_GAP: f64 = 1e-4;
const POINT_GAP: f64 = 1e-3;

/// A group of converged solves that reached the same solution.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Cheapest member.
    pub result: SolveResult,
    pub members: usize,
    /// Index of the start that produced `result`.
    pub start_index: usize,
}

/// The `index`-th random initial point for `cfg.seed`. Each index draws from
/// its own stream, so points do not depend on how many were requested.
pub fn random_start(net: &Network, cfg: &SolverConfig, index: u64) -> OperatingPoint {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(index);
    let n = net.n_bus();
    let mut x = match cfg.random_start {
        RandomStart::Uniform => OperatingPoint {
            v: net
                .buses()
                .iter()
                .map(|b| {
                    if b.v_min < b.v_max {
                        rng.random_range(b.v_min..=b.v_max)
                    } else {
                        b.v_min
                    }
                })
                .collect(),
            theta: (0..n).map(|_| rng.random_range(-PI..PI)).collect(),
        },
        RandomStart::Gaussian => {
            let vn = Normal::new(1.0, 0.05).unwrap();
            let tn = Normal::new(0.0, 0.5).unwrap();
            let mut x = OperatingPoint {
                v: (0..n).map(|_| vn.sample(&mut rng)).collect(),
                theta: (0..n).map(|_| tn.sample(&mut rng)).collect(),
            };
            x.clip_voltages(net);
            x
        }
    };
    x.theta[net.slack()] = 0.0;
    x
}

/// Solves from the flat start and `k - 1` random starts, then groups the
/// converged results. Clusters come back cheapest first; the first one is
/// the global candidate. Failed solves are dropped.
pub fn multi_start(
    net: &Network,
    load: &LoadProfile,
    k: usize,
    cfg: &SolverConfig,
) -> Result<Vec<Cluster>, SolverError> {
    cfg.validate()?;
    let runs: Vec<Result<SolveResult, SolverError>> = (0..k)
        .into_par_iter()
        .map(|i| {
            let (init, kind) = if i == 0 {
                (OperatingPoint::flat(net), StartKind::Flat)
            } else {
                (random_start(net, cfg, i as u64), StartKind::Random)
            };
            solve_acopf(net, load, &init, cfg).map(|mut r| {
                r.start = kind;
                r
            })
        })
        .collect();
    let mut ok = Vec::with_capacity(k);
    for (i, run) in runs.into_iter().enumerate() {
        let r = run?;
        if r.converged() {
            ok.push((i, r));
        }
    }
    Ok(cluster(ok))
}

fn same_solution(a: &SolveResult, b: &SolveResult) -> bool {
    let gap = (a.cost - b.cost).abs() / a.cost.abs().max(b.cost.abs()).max(1e-12);
    (gap < COST_GAP || (a.cost - b.cost).abs() < 1e-12) && a.point.distance_inf(&b.point) < POINT_GAP
}

fn cluster(runs: Vec<(usize, SolveResult)>) -> Vec<Cluster> {
    let mut clusters: Vec<Cluster> = Vec::new();
    for (i, r) in runs {
        match clusters.iter_mut().find(|c| same_solution(&c.result, &r)) {
            Some(c) => {
                c.members += 1;
                if r.cost < c.result.cost {
                    c.result = r;
                    c.start_index = i;
                }
            }
            None => clusters.push(Cluster {
                result: r,
                members: 1,
                start_index: i,
            }),
        }
    }
    clusters.sort_by(|a, b| {
        a.result
            .cost
            .total_cmp(&b.result.cost)
            .then(a.start_index.cmp(&b.start_index))
    });
    clusters
}
