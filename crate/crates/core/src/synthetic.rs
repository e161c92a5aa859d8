//! Randomly generated small networks and operating points, for property
//! checks and benchmarks.

use rand::Rng;

use crate::network::{Branch, Bus, BusKind, CostPolynomial, Generator, LoadProfile, Network};
use crate::opf::OperatingPoint;

/// A connected network with `n >= 2` buses: a random spanning tree plus a few
/// extra lines, generators on roughly a third of the buses and flow limits on
/// some branches. Bus 0 is the slack.
pub fn random_network<R: Rng>(n: usize, rng: &mut R) -> Network {
    assert!(n >= 2, "need at least two buses");
    let buses: Vec<Bus> = (0..n)
        .map(|id| {
            let kind = if id == 0 {
                BusKind::Slack
            } else if rng.random_bool(0.35) {
                BusKind::Generator
            } else {
                BusKind::Load
            };
            Bus {
                id,
                label: id as u64 + 1,
                kind,
                v_min: 0.9,
                v_max: 1.1,
                p_load: rng.random_range(0.0..0.8),
                q_load: rng.random_range(-0.1..0.3),
            }
        })
        .collect();
    let line = |from: usize, to: usize, rng: &mut R| {
        let r = rng.random_range(0.005..0.05);
        let x = rng.random_range(0.05..0.3);
        let z2 = r * r + x * x;
        Branch {
            from,
            to,
            g: r / z2,
            b: x / z2,
            b_charge: rng.random_range(0.0..0.1),
            s_max: rng.random_bool(0.4).then(|| rng.random_range(1.0..3.0)),
            in_service: true,
        }
    };
    let mut branches: Vec<Branch> = (1..n).map(|i| line(rng.random_range(0..i), i, rng)).collect();
    for _ in 0..n / 2 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b {
            branches.push(line(a, b, rng));
        }
    }
    let generators = buses
        .iter()
        .filter(|b| b.kind != BusKind::Load)
        .map(|b| Generator {
            bus: b.id,
            p_min: 0.0,
            p_max: rng.random_range(3.0..8.0),
            q_min: -4.0,
            q_max: 4.0,
            cost: CostPolynomial::new(0.0, rng.random_range(1.0..30.0), rng.random_range(0.0..5.0)),
        })
        .collect();
    Network::new(100.0, buses, branches, generators).expect("synthetic network is well formed")
}

/// Voltages near nominal and angles within a quarter radian, slack angle zero.
pub fn random_point<R: Rng>(net: &Network, rng: &mut R) -> OperatingPoint {
    let n = net.n_bus();
    let mut theta: Vec<f64> = (0..n).map(|_| rng.random_range(-0.25..0.25)).collect();
    theta[net.slack()] = 0.0;
    OperatingPoint {
        v: (0..n).map(|_| rng.random_range(0.92..1.08)).collect(),
        theta,
    }
}

/// Each entry of `load` scaled by an independent factor in `1 ± spread`.
pub fn perturbed_load<R: Rng>(load: &LoadProfile, spread: f64, rng: &mut R) -> LoadProfile {
    let mut draw = |x: &f64| x * (1.0 + rng.random_range(-spread..=spread));
    LoadProfile {
        p: load.p.iter().map(&mut draw).collect(),
        q: load.q.iter().map(&mut draw).collect(),
    }
}
