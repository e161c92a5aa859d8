use nalgebra::{DMatrix, DVector};

use crate::network::{LoadProfile, Network};
use crate::opf::{directed_flow, OperatingPoint};

use super::acopf::check_inputs;
use super::{SolverConfig, SolverError};

const TOL: f64 = 1e-10;
const ACCEPT: f64 = 1e-8;

struct Injections {
    p: Vec<f64>,
    q: Vec<f64>,
    dp_dv: DMatrix<f64>,
    dp_dt: DMatrix<f64>,
    dq_dv: DMatrix<f64>,
    dq_dt: DMatrix<f64>,
}

fn injections_with_jacobian(net: &Network, x: &OperatingPoint) -> Injections {
    let n = net.n_bus();
    let mut out = Injections {
        p: vec![0.0; n],
        q: vec![0.0; n],
        dp_dv: DMatrix::zeros(n, n),
        dp_dt: DMatrix::zeros(n, n),
        dq_dv: DMatrix::zeros(n, n),
        dq_dt: DMatrix::zeros(n, n),
    };
    for br in net.in_service_branches() {
        for (i, j) in [(br.from, br.to), (br.to, br.from)] {
            let f = directed_flow(br, x.v[i], x.v[j], x.theta[i], x.theta[j]);
            out.p[i] += f.p;
            out.q[i] += f.q;
            out.dp_dv[(i, i)] += f.dp[0];
            out.dp_dv[(i, j)] += f.dp[1];
            out.dp_dt[(i, i)] += f.dp[2];
            out.dp_dt[(i, j)] += f.dp[3];
            out.dq_dv[(i, i)] += f.dq[0];
            out.dq_dv[(i, j)] += f.dq[1];
            out.dq_dt[(i, i)] += f.dq[2];
            out.dq_dt[(i, j)] += f.dq[3];
        }
    }
    out
}

/// Newton-Raphson power flow.
///
/// Generator buses hold their voltage magnitude at `fixed_vm`; non-slack
/// generator buses also inject `fixed_p`. The slack bus absorbs the active
/// imbalance and load buses are solved for both magnitude and angle.
/// Entries of `fixed_p` and `fixed_vm` at other buses are ignored.
pub fn solve_power_flow(
    net: &Network,
    load: &LoadProfile,
    fixed_p: &[f64],
    fixed_vm: &[f64],
    init: &OperatingPoint,
    cfg: &SolverConfig,
) -> Result<OperatingPoint, SolverError> {
    check_inputs(net, load, init)?;
    let n = net.n_bus();
    if fixed_p.len() != n || fixed_vm.len() != n {
        return Err(SolverError::Dimension(format!("setpoints need {n} entries per vector")));
    }
    let slack = net.slack();
    let angle_buses: Vec<usize> = (0..n).filter(|&i| i != slack).collect();
    let pq_buses: Vec<usize> = (0..n).filter(|&i| i != slack && !net.has_generator(i)).collect();
    let injected = |i: usize| {
        if i != slack && net.has_generator(i) {
            fixed_p[i]
        } else {
            0.0
        }
    };

    let mut x = init.clone().normalized(slack);
    for i in 0..n {
        if i == slack || net.has_generator(i) {
            x.v[i] = fixed_vm[i];
        }
    }
    let (na, nq) = (angle_buses.len(), pq_buses.len());
    let dim = na + nq;

    for it in 0..=cfg.max_inner {
        let inj = injections_with_jacobian(net, &x);
        let mut mismatch = DVector::zeros(dim);
        for (r, &i) in angle_buses.iter().enumerate() {
            mismatch[r] = load.p[i] + inj.p[i] - injected(i);
        }
        for (r, &i) in pq_buses.iter().enumerate() {
            mismatch[na + r] = load.q[i] + inj.q[i];
        }
        let norm = mismatch.amax();
        if !norm.is_finite() || norm > 1e6 {
            return Err(SolverError::Diverged(norm));
        }
        if norm < TOL || (it == cfg.max_inner && norm < ACCEPT) {
            return Ok(x);
        }
        if it == cfg.max_inner {
            return Err(SolverError::NoConvergence {
                iterations: it,
                residual: norm,
            });
        }
        let mut jac = DMatrix::zeros(dim, dim);
        for (r, &i) in angle_buses.iter().enumerate() {
            for (c, &k) in angle_buses.iter().enumerate() {
                jac[(r, c)] = inj.dp_dt[(i, k)];
            }
            for (c, &k) in pq_buses.iter().enumerate() {
                jac[(r, na + c)] = inj.dp_dv[(i, k)];
            }
        }
        for (r, &i) in pq_buses.iter().enumerate() {
            for (c, &k) in angle_buses.iter().enumerate() {
                jac[(na + r, c)] = inj.dq_dt[(i, k)];
            }
            for (c, &k) in pq_buses.iter().enumerate() {
                jac[(na + r, na + c)] = inj.dq_dv[(i, k)];
            }
        }
        let step = jac
            .lu()
            .solve(&mismatch)
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or(SolverError::SingularJacobian(it))?;
        for (r, &i) in angle_buses.iter().enumerate() {
            x.theta[i] -= step[r];
        }
        for (r, &i) in pq_buses.iter().enumerate() {
            x.v[i] -= step[na + r];
        }
    }
    unreachable!("loop returns on its last iteration")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::network::{nominal_load, BusKind, CostPolynomial};
    use crate::opf::{bus_injections, implied_dispatch};

    fn cfg() -> SolverConfig {
        SolverConfig {
            max_inner: 30,
            ..SolverConfig::default()
        }
    }

    #[test]
    fn zero_load_gives_flat_point() {
        let net = two_bus();
        let flat = OperatingPoint::flat(&net);
        let x = solve_power_flow(&net, &LoadProfile::zeros(2), &[0.0; 2], &[1.0; 2], &flat, &cfg()).unwrap();
        assert!(x.distance_inf(&flat) < 1e-12);
    }

    #[test]
    fn recovers_angle_from_its_injection() {
        let net = Network::new(
            100.0,
            vec![bus(0, BusKind::Slack, 0.0, 0.0), bus(1, BusKind::Generator, 0.0, 0.0)],
            vec![line(0, 1, 1.0, 5.0, 0.0)],
            vec![gen(0, CostPolynomial::linear(1.0)), gen(1, CostPolynomial::linear(1.0))],
        )
        .unwrap();
        let target = OperatingPoint {
            v: vec![1.0, 1.0],
            theta: vec![0.0, 0.21],
        };
        let (p, _) = bus_injections(&net, &target);
        let x = solve_power_flow(
            &net,
            &LoadProfile::zeros(2),
            &p,
            &[1.0, 1.0],
            &OperatingPoint::flat(&net),
            &cfg(),
        )
        .unwrap();
        assert!((x.theta[1] - 0.21).abs() < 1e-8);
    }

    #[test]
    fn mixed_bus_types_reach_tight_mismatch() {
        let net = three_bus_loop();
        let load = nominal_load(&net);
        let x = solve_power_flow(
            &net,
            &load,
            &[0.0, 0.6, 0.0],
            &[1.02, 1.01, 0.0],
            &OperatingPoint::flat(&net),
            &cfg(),
        )
        .unwrap();
        let gen = implied_dispatch(&net, &x, &load);
        assert!((gen.p[1] - 0.6).abs() < 1e-8);
        assert_eq!(x.v[0], 1.02);
        let (_, q) = bus_injections(&net, &x);
        assert!((load.q[2] + q[2]).abs() < 1e-8);
    }
}
