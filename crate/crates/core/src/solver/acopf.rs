use std::time::Instant;

use nalgebra::{DMatrix, DVector};

use crate::network::{LoadProfile, Network};
use crate::opf::{
    augmented_objective, constraint_values, first_order_data, generation_cost, implied_dispatch, ConstraintSet,
    DualVector, OperatingPoint, PointGradient,
};

use super::lbfgs::{minimize, LbfgsOptions};
use super::{SolveResult, SolveStatus, SolverConfig, SolverError, StartKind};

const RHO_MAX: f64 = 1e10;
const DIVERGED: f64 = 1e6;
/// Bound on a starting multiplier estimate, in scaled cost units.
const LAMBDA_CAP: f64 = 1e4;

pub(crate) fn pack(x: &OperatingPoint) -> Vec<f64> {
    let mut z = x.v.clone();
    z.extend_from_slice(&x.theta);
    z
}

pub(crate) fn unpack(z: &[f64]) -> OperatingPoint {
    let n = z.len() / 2;
    OperatingPoint {
        v: z[..n].to_vec(),
        theta: z[n..].to_vec(),
    }
}

/// Voltage boxes from the network, slack angle pinned to zero, other angles free.
pub(crate) fn boxes(net: &Network) -> (Vec<f64>, Vec<f64>) {
    let n = net.n_bus();
    let mut lo: Vec<f64> = net.buses().iter().map(|b| b.v_min).collect();
    let mut hi: Vec<f64> = net.buses().iter().map(|b| b.v_max).collect();
    lo.extend(std::iter::repeat(f64::NEG_INFINITY).take(n));
    hi.extend(std::iter::repeat(f64::INFINITY).take(n));
    lo[n + net.slack()] = 0.0;
    hi[n + net.slack()] = 0.0;
    (lo, hi)
}

/// Brings objective values of order one so a single gradient tolerance works
/// across cases priced in very different units.
pub(crate) fn cost_scale(net: &Network) -> f64 {
    let gens = net.generators();
    if gens.is_empty() {
        return 1.0;
    }
    let mean = gens.iter().map(|g| g.cost.c1.abs() + g.cost.c2).sum::<f64>() / gens.len() as f64;
    1.0 / mean.max(1.0)
}

pub(crate) fn check_inputs(net: &Network, load: &LoadProfile, init: &OperatingPoint) -> Result<(), SolverError> {
    let n = net.n_bus();
    if load.p.len() != n || load.q.len() != n {
        return Err(SolverError::Dimension(format!(
            "load has {} entries, network has {n} buses",
            load.p.len()
        )));
    }
    if init.v.len() != n || init.theta.len() != n {
        return Err(SolverError::Dimension(format!(
            "initial point has {} entries, network has {n} buses",
            init.v.len()
        )));
    }
    Ok(())
}

/// Least-squares multipliers at the start: the `lambda` minimizing the
/// gradient of the Lagrangian over the free coordinates, with multipliers
/// only on equalities and on inequalities at or past a bound. Near a KKT
/// point this is close to the optimal multipliers, so a good start is not
/// thrown off by a zero first estimate.
fn initial_multipliers(
    net: &Network,
    set: &ConstraintSet,
    z: &[f64],
    load: &LoadProfile,
    sigma: f64,
    lo: &[f64],
    hi: &[f64],
) -> Vec<f64> {
    let x = unpack(z);
    let s = constraint_values(net, set, &x, load);
    let (cost, jac) = first_order_data(net, set, &x, load, sigma);
    let active: Vec<usize> = (0..set.len())
        .filter(|&k| set.lo[k] == set.hi[k] || s[k] <= set.lo[k] || s[k] >= set.hi[k])
        .collect();
    let free: Vec<usize> = (0..z.len()).filter(|&i| lo[i] < z[i] && z[i] < hi[i]).collect();
    let mut lambda = vec![0.0; set.len()];
    if active.is_empty() || free.is_empty() {
        return lambda;
    }
    let coord = |g: &PointGradient, i: usize| {
        let n = g.v.len();
        if i < n {
            g.v[i]
        } else {
            g.theta[i - n]
        }
    };
    let a = DMatrix::from_fn(free.len(), active.len(), |r, c| coord(&jac[active[c]], free[r]));
    let b = DVector::from_fn(free.len(), |r, _| -coord(&cost, free[r]));
    let Ok(sol) = a.svd(true, true).solve(&b, 1e-10) else {
        return lambda;
    };
    for (c, &k) in active.iter().enumerate() {
        let mut l = sol[c];
        if !l.is_finite() {
            continue;
        }
        // An inequality multiplier pushes only away from its violated side.
        if set.lo[k] != set.hi[k] {
            l = if s[k] >= set.hi[k] { l.max(0.0) } else { l.min(0.0) };
        }
        lambda[k] = l.clamp(-LAMBDA_CAP, LAMBDA_CAP);
    }
    lambda
}

/// Augmented Lagrangian solve of the full problem from `init`.
///
/// Each outer iteration minimizes the augmented merit over `(v, theta)` with
/// projected L-BFGS, then updates the multiplier estimates and grows the
/// penalty when the violation does not shrink fast enough. The returned
/// duals are the balance multipliers of the partial Lagrangian, recovered
/// from those estimates.
pub fn solve_acopf(
    net: &Network,
    load: &LoadProfile,
    init: &OperatingPoint,
    cfg: &SolverConfig,
) -> Result<SolveResult, SolverError> {
    cfg.validate()?;
    check_inputs(net, load, init)?;
    let clock = Instant::now();
    let n = net.n_bus();
    let set = ConstraintSet::new(net);
    let sigma = cost_scale(net);
    let (lo, hi) = boxes(net);
    let opts = LbfgsOptions {
        memory: 10,
        max_iter: cfg.max_inner,
        tol_grad: cfg.tol_grad,
    };

    let mut z = pack(&init.clone().normalized(net.slack()));
    for i in 0..n {
        z[i] = z[i].clamp(lo[i], hi[i]);
    }
    let mut lambda = initial_multipliers(net, &set, &z, load, sigma, &lo, &hi);
    let mut rho = cfg.rho_init;
    let mut iterations = 0;
    let mut prev_violation = f64::INFINITY;
    let mut status = SolveStatus::MaxIter;
    let mut violation = f64::INFINITY;
    let mut outer = 0;

    while outer < cfg.max_outer {
        outer += 1;
        let out = minimize(
            |zz| {
                let x = unpack(zz);
                let (f, g) = augmented_objective(net, &set, &x, load, &lambda, rho, sigma);
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
        let s = constraint_values(net, &set, &unpack(&z), load);
        violation = set.violations(&s).into_iter().fold(0.0, f64::max);
        if !violation.is_finite() || violation > DIVERGED {
            status = SolveStatus::Diverged;
            break;
        }
        for k in 0..set.len() {
            let t = s[k] + lambda[k] / rho;
            lambda[k] = rho * (t - t.clamp(set.lo[k], set.hi[k]));
        }
        if violation <= cfg.tol_residual && out.converged {
            status = SolveStatus::Converged;
            break;
        }
        if violation > cfg.tol_residual && violation > 0.25 * prev_violation {
            rho = (rho * cfg.rho_growth).min(RHO_MAX);
        }
        prev_violation = violation;
    }

    let point = unpack(&z).normalized(net.slack());
    let gen = implied_dispatch(net, &point, load);
    let mut duals = DualVector::zeros(n);
    for i in 0..n {
        let (lp, lq) = (lambda[2 * i] / sigma, lambda[2 * i + 1] / sigma);
        duals.mu_p[i] = lp;
        duals.mu_q[i] = lq;
        if let Some(g) = net.generator_at(i) {
            duals.mu_p[i] += g.cost.derivative(gen.p[i]);
        }
    }
    Ok(SolveResult {
        cost: generation_cost(net, &gen),
        point,
        gen,
        duals,
        status,
        iterations,
        outer_iterations: outer,
        violation,
        wall_time: clock.elapsed().as_secs_f64(),
        start: StartKind::Given,
    })
}
