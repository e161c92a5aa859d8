use crate::network::{LoadProfile, Network};
use crate::opf::{
    constraint_values, lagrangian_network_part, ConstraintKind, ConstraintSet, DualVector, GenDispatch, OperatingPoint,
};

use super::acopf::{boxes, check_inputs, cost_scale, pack, unpack};
use super::lbfgs::{minimize, LbfgsOptions};
use super::{SolverConfig, SolverError};

/// Dispatch minimizing the partial Lagrangian for fixed multipliers; the
/// problem separates per generator.
pub fn best_dispatch(net: &Network, mu: &DualVector) -> GenDispatch {
    let mut gen = GenDispatch::zeros(net.n_bus());
    for g in net.generators() {
        let i = g.bus;
        gen.p[i] = g.cost.best_response(mu.mu_p[i], g.p_min, g.p_max);
        gen.q[i] = if mu.mu_q[i] > 0.0 { g.q_max } else { g.q_min };
    }
    gen
}

/// Minimizes the partial Lagrangian for fixed multipliers `mu`, keeping
/// voltage, generation and flow limits as constraints.
///
/// Dispatch has a closed form. The network variables are found by projected
/// L-BFGS from `init`, with flow limits enforced through an augmented
/// Lagrangian loop when the network has any.
pub fn solve_partial_lagrangian(
    net: &Network,
    load: &LoadProfile,
    mu: &DualVector,
    init: &OperatingPoint,
    cfg: &SolverConfig,
) -> Result<(OperatingPoint, GenDispatch), SolverError> {
    cfg.validate()?;
    check_inputs(net, load, init)?;
    if mu.mu_p.len() != net.n_bus() || mu.mu_q.len() != net.n_bus() {
        return Err(SolverError::Dimension(format!(
            "multipliers have {} entries, network has {} buses",
            mu.mu_p.len(),
            net.n_bus()
        )));
    }
    if mu.mu_p.iter().chain(&mu.mu_q).any(|m| !m.is_finite()) {
        return Err(SolverError::Diverged(f64::NAN));
    }
    let gen = best_dispatch(net, mu);
    let set = ConstraintSet::new(net);
    let flow_ids: Vec<usize> = (0..set.len())
        .filter(|&k| matches!(set.kinds[k], ConstraintKind::Flow { .. }))
        .collect();
    let scale = cost_scale(net);
    let (lo, hi) = boxes(net);
    let opts = LbfgsOptions {
        memory: 10,
        max_iter: cfg.max_inner,
        tol_grad: cfg.tol_grad,
    };
    let mut z = pack(&init.clone().normalized(net.slack()));
    let mut lambda = vec![0.0; set.len()];
    let mut rho = cfg.rho_init;
    let mut prev = f64::INFINITY;
    let mut violation = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..cfg.max_outer {
        let out = minimize(
            |zz| {
                let (f, g) = lagrangian_network_part(net, &set, &unpack(zz), mu, scale, &lambda, rho);
                let mut grad = g.v;
                grad.extend(g.theta);
                (f, grad)
            },
            &z,
            &lo,
            &hi,
            opts,
        );
        iterations += out.iterations;
        z = out.x;
        if !out.f.is_finite() {
            return Err(SolverError::Diverged(out.f));
        }
        if flow_ids.is_empty() {
            if out.converged {
                let point = unpack(&z).normalized(net.slack());
                return Ok((point, gen));
            }
            return Err(SolverError::NoConvergence {
                iterations,
                residual: out.proj_grad,
            });
        }
        let s = constraint_values(net, &set, &unpack(&z), load);
        violation = flow_ids
            .iter()
            .map(|&k| (s[k] - set.hi[k]).max(0.0))
            .fold(0.0, f64::max);
        for &k in &flow_ids {
            let t = s[k] + lambda[k] / rho;
            lambda[k] = rho * (t - t.clamp(set.lo[k], set.hi[k]));
        }
        if violation <= cfg.tol_residual && out.converged {
            return Ok((unpack(&z).normalized(net.slack()), gen));
        }
        if violation > cfg.tol_residual && violation > 0.25 * prev {
            rho = (rho * cfg.rho_growth).min(1e10);
        }
        prev = violation;
    }
    Err(SolverError::NoConvergence {
        iterations,
        residual: violation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::network::{nominal_load, BusKind, CostPolynomial, Generator};

    #[test]
    fn zero_prices_put_dispatch_at_lower_bounds() {
        let net = three_bus_loop();
        let (_, gen) = solve_partial_lagrangian(
            &net,
            &nominal_load(&net),
            &DualVector::zeros(3),
            &OperatingPoint::flat(&net),
            &SolverConfig::default(),
        )
        .unwrap();
        for g in net.generators() {
            assert_eq!(gen.p[g.bus], g.p_min);
        }
    }

    #[test]
    fn quadratic_cost_dispatch_from_stationarity() {
        let net = Network::new(
            100.0,
            vec![bus(0, BusKind::Slack, 0.0, 0.0), bus(1, BusKind::Load, 0.0, 0.0)],
            vec![line(0, 1, 0.0, 5.0, 0.0)],
            vec![Generator {
                bus: 0,
                p_min: -1.0,
                p_max: 1.0,
                q_min: -1.0,
                q_max: 1.0,
                cost: CostPolynomial::new(0.0, 0.0, 1.0),
            }],
        )
        .unwrap();
        let mu = DualVector {
            mu_p: vec![1.0, 1.0],
            mu_q: vec![0.0, 0.0],
        };
        let gen = best_dispatch(&net, &mu);
        assert_eq!(gen.p[0], 0.5);
    }

    #[test]
    fn two_bus_angle_has_closed_form() {
        // With unit voltages the objective is
        // (m1 + m2) g (1 - cos t) + (m1 - m2) b sin t in t = theta_1 - theta_2.
        let (g, b) = (1.0, 5.0);
        let mut buses = vec![bus(0, BusKind::Slack, 0.0, 0.0), bus(1, BusKind::Load, 0.8, 0.0)];
        for bs in &mut buses {
            bs.v_min = 1.0;
            bs.v_max = 1.0;
        }
        let net = Network::new(
            100.0,
            buses,
            vec![line(0, 1, g, b, 0.0)],
            vec![gen(0, CostPolynomial::new(0.0, 1.0, 1.0))],
        )
        .unwrap();
        let mu = DualVector {
            mu_p: vec![2.6, 7.8],
            mu_q: vec![0.0, 0.0],
        };
        let (x, _) = solve_partial_lagrangian(
            &net,
            &nominal_load(&net),
            &mu,
            &OperatingPoint::flat(&net),
            &SolverConfig::default(),
        )
        .unwrap();
        let t = ((mu.mu_p[1] - mu.mu_p[0]) / (mu.mu_p[1] + mu.mu_p[0]) * b / g).atan();
        assert!((x.theta[0] - x.theta[1] - t).abs() < 1e-6);
    }

    #[test]
    fn flow_limit_is_enforced() {
        let mut net = three_bus_loop();
        let mut branches = net.branches().to_vec();
        branches[2].s_max = Some(0.3);
        net = Network::new(100.0, net.buses().to_vec(), branches, net.generators().to_vec()).unwrap();
        let mu = DualVector {
            mu_p: vec![2.0, 3.0, 9.0],
            mu_q: vec![0.0, 0.0, 0.5],
        };
        let (x, _) = solve_partial_lagrangian(
            &net,
            &nominal_load(&net),
            &mu,
            &OperatingPoint::flat(&net),
            &SolverConfig::default(),
        )
        .unwrap();
        let f = crate::opf::branch_flows(&net, &x);
        let s = (f.p_from[2].powi(2) + f.q_from[2].powi(2)).sqrt();
        assert!(s <= 0.3 + 1e-7, "flow {s}");
    }
}
