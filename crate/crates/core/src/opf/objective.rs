use crate::network::{LoadProfile, Network};

use super::flows::{branch_pair, DirectedFlow};
use super::{check_dims, DualVector, GenDispatch, OperatingPoint};

/// Gradient with respect to `(v, theta)`. The slack angle is not a decision
/// variable, so its entry is always zero.
#[derive(Debug, Clone, PartialEq)]
pub struct PointGradient {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl PointGradient {
    pub fn norm_inf(&self) -> f64 {
        self.v.iter().chain(&self.theta).fold(0.0, |m, x| m.max(x.abs()))
    }
}

/// Gradient of the partial Lagrangian. Dispatch entries at buses without a
/// generator are not variables and stay zero.
#[derive(Debug, Clone, PartialEq)]
pub struct LagrangianGradient {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// `load + injection` at a bus: pinned to zero without a generator,
    /// boxed by the generator limits otherwise.
    Active(usize),
    Reactive(usize),
    /// Squared apparent flow on one direction of a branch.
    Flow {
        branch: usize,
        reverse: bool,
    },
}

/// Every constraint of the full problem other than the voltage boxes,
/// written as `lo <= s(x) <= hi`.
///
/// Layout: `2i` and `2i + 1` are the active and reactive constraints at bus
/// `i`; flow limits follow, two per limited branch.
#[derive(Debug, Clone)]
pub struct ConstraintSet {
    pub kinds: Vec<ConstraintKind>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    flow_of_branch: Vec<Option<usize>>,
}

impl ConstraintSet {
    pub fn new(net: &Network) -> Self {
        let n = net.n_bus();
        let mut kinds = Vec::with_capacity(2 * n);
        let mut lo = Vec::with_capacity(2 * n);
        let mut hi = Vec::with_capacity(2 * n);
        for i in 0..n {
            let (pb, qb) = match net.generator_at(i) {
                Some(g) => ((g.p_min, g.p_max), (g.q_min, g.q_max)),
                None => ((0.0, 0.0), (0.0, 0.0)),
            };
            kinds.push(ConstraintKind::Active(i));
            lo.push(pb.0);
            hi.push(pb.1);
            kinds.push(ConstraintKind::Reactive(i));
            lo.push(qb.0);
            hi.push(qb.1);
        }
        let mut flow_of_branch = vec![None; net.branches().len()];
        for (k, br) in net.branches().iter().enumerate() {
            if let (true, Some(s)) = (br.in_service, br.s_max) {
                flow_of_branch[k] = Some(kinds.len());
                for reverse in [false, true] {
                    kinds.push(ConstraintKind::Flow { branch: k, reverse });
                    lo.push(f64::NEG_INFINITY);
                    hi.push(s * s);
                }
            }
        }
        Self {
            kinds,
            lo,
            hi,
            flow_of_branch,
        }
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    /// Distance of each value from its feasible interval.
    pub fn violations(&self, s: &[f64]) -> Vec<f64> {
        s.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .map(|(&x, (&l, &h))| (x - x.clamp(l, h)).abs())
            .collect()
    }
}

/// Shifted quadratic penalty for `lo <= s <= hi` with multiplier `lambda`:
/// `rho/2 * dist(s + lambda/rho, [lo, hi])^2 - lambda^2 / (2 rho)`.
/// Returns the value and its derivative in `s`; the derivative is also the
/// first-order multiplier update.
pub fn range_penalty(s: f64, lambda: f64, rho: f64, lo: f64, hi: f64) -> (f64, f64) {
    let t = s + lambda / rho;
    let d = t - t.clamp(lo, hi);
    (0.5 * rho * d * d - 0.5 * lambda * lambda / rho, rho * d)
}

struct Flows {
    pairs: Vec<(usize, DirectedFlow, DirectedFlow)>,
    p_inj: Vec<f64>,
    q_inj: Vec<f64>,
}

fn compute_flows(net: &Network, x: &OperatingPoint) -> Flows {
    let n = net.n_bus();
    let mut p_inj = vec![0.0; n];
    let mut q_inj = vec![0.0; n];
    let mut pairs = Vec::with_capacity(net.branches().len());
    for (k, br) in net.branches().iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let (f, t) = branch_pair(br, x);
        p_inj[br.from] += f.p;
        q_inj[br.from] += f.q;
        p_inj[br.to] += t.p;
        q_inj[br.to] += t.q;
        pairs.push((k, f, t));
    }
    Flows { pairs, p_inj, q_inj }
}

/// Chain rule from per-bus injection weights and per-direction flow-limit
/// weights down to `(v, theta)`.
fn backprop(
    net: &Network,
    flows: &Flows,
    wp: &[f64],
    wq: &[f64],
    flow_weight: impl Fn(usize, bool) -> f64,
) -> PointGradient {
    let n = net.n_bus();
    let mut gv = vec![0.0; n];
    let mut gt = vec![0.0; n];
    for &(k, ref f, ref t) in &flows.pairs {
        let br = &net.branches()[k];
        for (dir, reverse, i, j) in [(f, false, br.from, br.to), (t, true, br.to, br.from)] {
            let wf = flow_weight(k, reverse);
            let a = wp[i] + 2.0 * wf * dir.p;
            let c = wq[i] + 2.0 * wf * dir.q;
            gv[i] += a * dir.dp[0] + c * dir.dq[0];
            gv[j] += a * dir.dp[1] + c * dir.dq[1];
            gt[i] += a * dir.dp[2] + c * dir.dq[2];
            gt[j] += a * dir.dp[3] + c * dir.dq[3];
        }
    }
    gt[net.slack()] = 0.0;
    PointGradient { v: gv, theta: gt }
}

/// Constraint values `s(x)` in [`ConstraintSet`] order.
pub fn constraint_values(net: &Network, set: &ConstraintSet, x: &OperatingPoint, load: &LoadProfile) -> Vec<f64> {
    check_dims(net, x, load);
    let flows = compute_flows(net, x);
    let mut s = Vec::with_capacity(set.len());
    for i in 0..net.n_bus() {
        s.push(load.p[i] + flows.p_inj[i]);
        s.push(load.q[i] + flows.q_inj[i]);
    }
    for &(k, ref f, ref t) in &flows.pairs {
        if set.flow_of_branch[k].is_some() {
            s.push(f.p * f.p + f.q * f.q);
            s.push(t.p * t.p + t.q * t.q);
        }
    }
    s
}

/// Augmented Lagrangian merit over `(v, theta)`:
/// `cost_scale * sum c_i(implied P_i) + sum_k range_penalty(s_k, lambda_k)`.
pub fn augmented_objective(
    net: &Network,
    set: &ConstraintSet,
    x: &OperatingPoint,
    load: &LoadProfile,
    lambda: &[f64],
    rho: f64,
    cost_scale: f64,
) -> (f64, PointGradient) {
    check_dims(net, x, load);
    debug_assert_eq!(lambda.len(), set.len());
    let n = net.n_bus();
    let flows = compute_flows(net, x);
    let mut value = 0.0;
    let mut wp = vec![0.0; n];
    let mut wq = vec![0.0; n];
    for i in 0..n {
        let sp = load.p[i] + flows.p_inj[i];
        let sq = load.q[i] + flows.q_inj[i];
        if let Some(g) = net.generator_at(i) {
            value += cost_scale * g.cost.eval(sp);
            wp[i] += cost_scale * g.cost.derivative(sp);
        }
        let (kp, kq) = (2 * i, 2 * i + 1);
        let (vp, dp) = range_penalty(sp, lambda[kp], rho, set.lo[kp], set.hi[kp]);
        let (vq, dq) = range_penalty(sq, lambda[kq], rho, set.lo[kq], set.hi[kq]);
        value += vp + vq;
        wp[i] += dp;
        wq[i] += dq;
    }
    let mut wf = vec![0.0; set.len()];
    for &(k, ref f, ref t) in &flows.pairs {
        if let Some(c) = set.flow_of_branch[k] {
            for (idx, d) in [(c, f), (c + 1, t)] {
                let s = d.p * d.p + d.q * d.q;
                let (v, w) = range_penalty(s, lambda[idx], rho, set.lo[idx], set.hi[idx]);
                value += v;
                wf[idx] = w;
            }
        }
    }
    let grad = backprop(net, &flows, &wp, &wq, |k, reverse| {
        set.flow_of_branch[k].map_or(0.0, |c| wf[c + usize::from(reverse)])
    });
    (value, grad)
}

/// Gradient of the scaled cost and of every constraint value over
/// `(v, theta)`, in [`ConstraintSet`] order.
pub(crate) fn first_order_data(
    net: &Network,
    set: &ConstraintSet,
    x: &OperatingPoint,
    load: &LoadProfile,
    cost_scale: f64,
) -> (PointGradient, Vec<PointGradient>) {
    check_dims(net, x, load);
    let n = net.n_bus();
    let flows = compute_flows(net, x);
    let mut wp = vec![0.0; n];
    let wq = vec![0.0; n];
    for g in net.generators() {
        wp[g.bus] += cost_scale * g.cost.derivative(load.p[g.bus] + flows.p_inj[g.bus]);
    }
    let cost = backprop(net, &flows, &wp, &wq, |_, _| 0.0);
    let mut jac = Vec::with_capacity(set.len());
    for k in 0..set.len() {
        let grad = match set.kinds[k] {
            ConstraintKind::Active(i) | ConstraintKind::Reactive(i) => {
                let mut unit = vec![0.0; n];
                unit[i] = 1.0;
                let zero = vec![0.0; n];
                if matches!(set.kinds[k], ConstraintKind::Active(_)) {
                    backprop(net, &flows, &unit, &zero, |_, _| 0.0)
                } else {
                    backprop(net, &flows, &zero, &unit, |_, _| 0.0)
                }
            }
            ConstraintKind::Flow { branch, reverse } => {
                let zero = vec![0.0; n];
                backprop(net, &flows, &zero, &zero, |b, r| {
                    if b == branch && r == reverse {
                        1.0
                    } else {
                        0.0
                    }
                })
            }
        };
        jac.push(grad);
    }
    (cost, jac)
}

/// Cost of the implied dispatch plus `rho/2` times the squared violation of
/// every balance, generation-limit and flow-limit constraint. Voltage bounds
/// are left to projection.
pub fn penalized_objective(net: &Network, x: &OperatingPoint, load: &LoadProfile, rho: f64) -> (f64, PointGradient) {
    let set = ConstraintSet::new(net);
    let zeros = vec![0.0; set.len()];
    augmented_objective(net, &set, x, load, &zeros, rho, 1.0)
}

/// The partial Lagrangian obtained by dualizing only the power balance:
/// `sum c_i(P_i) + sum mu_p (Pd + Pf - P) + sum mu_q (Qd + Qf - Q)`.
/// Box and flow constraints are not included.
pub fn partial_lagrangian(
    net: &Network,
    x: &OperatingPoint,
    gen: &GenDispatch,
    load: &LoadProfile,
    mu: &DualVector,
) -> (f64, LagrangianGradient) {
    check_dims(net, x, load);
    let n = net.n_bus();
    let flows = compute_flows(net, x);
    let mut value = 0.0;
    let mut gp = vec![0.0; n];
    let mut gq = vec![0.0; n];
    for i in 0..n {
        value += mu.mu_p[i] * (load.p[i] + flows.p_inj[i] - gen.p[i]);
        value += mu.mu_q[i] * (load.q[i] + flows.q_inj[i] - gen.q[i]);
        if let Some(g) = net.generator_at(i) {
            value += g.cost.eval(gen.p[i]);
            gp[i] = g.cost.derivative(gen.p[i]) - mu.mu_p[i];
            gq[i] = -mu.mu_q[i];
        }
    }
    let grad = backprop(net, &flows, &mu.mu_p, &mu.mu_q, |_, _| 0.0);
    (
        value,
        LagrangianGradient {
            v: grad.v,
            theta: grad.theta,
            p: gp,
            q: gq,
        },
    )
}

/// The `(v, theta)` part of the partial Lagrangian, scaled, plus the shifted
/// flow-limit penalty: `scale * (sum mu_p Pf + sum mu_q Qf) + sum range_penalty`.
/// Only the flow entries of `lambda` are read.
pub(crate) fn lagrangian_network_part(
    net: &Network,
    set: &ConstraintSet,
    x: &OperatingPoint,
    mu: &DualVector,
    scale: f64,
    lambda: &[f64],
    rho: f64,
) -> (f64, PointGradient) {
    let flows = compute_flows(net, x);
    let n = net.n_bus();
    let wp: Vec<f64> = mu.mu_p.iter().map(|m| scale * m).collect();
    let wq: Vec<f64> = mu.mu_q.iter().map(|m| scale * m).collect();
    let mut value: f64 = (0..n).map(|i| wp[i] * flows.p_inj[i] + wq[i] * flows.q_inj[i]).sum();
    let mut wf = vec![0.0; set.len()];
    for &(k, ref f, ref t) in &flows.pairs {
        if let Some(c) = set.flow_of_branch[k] {
            for (idx, d) in [(c, f), (c + 1, t)] {
                let s = d.p * d.p + d.q * d.q;
                let (v, w) = range_penalty(s, lambda[idx], rho, set.lo[idx], set.hi[idx]);
                value += v;
                wf[idx] = w;
            }
        }
    }
    let grad = backprop(net, &flows, &wp, &wq, |k, reverse| {
        set.flow_of_branch[k].map_or(0.0, |c| wf[c + usize::from(reverse)])
    });
    (value, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::fixtures::*;
    use crate::network::nominal_load;
    use crate::opf::{balance_residuals, generation_cost, implied_dispatch};

    #[test]
    fn range_penalty_is_classical_for_equalities() {
        let (s, l, r) = (0.3, 1.7, 4.0);
        let (v, d) = range_penalty(s, l, r, 0.0, 0.0);
        assert!((v - (l * s + 0.5 * r * s * s)).abs() < 1e-14);
        assert!((d - (l + r * s)).abs() < 1e-14);
        assert_eq!(range_penalty(0.5, 0.0, 3.0, 0.0, 1.0), (0.0, 0.0));
    }

    #[test]
    fn penalized_equals_cost_at_feasible_interior_point() {
        // Load bus demand chosen to match the flows of a fixed point exactly,
        // so every balance and bound holds.
        let net = two_bus();
        let x = OperatingPoint {
            v: vec![1.0, 0.98],
            theta: vec![0.0, -0.08],
        };
        let (pi, qi) = crate::opf::bus_injections(&net, &x);
        let load = LoadProfile {
            p: vec![0.0, -pi[1]],
            q: vec![0.0, -qi[1]],
        };
        let gen = implied_dispatch(&net, &x, &load);
        let (val, _) = penalized_objective(&net, &x, &load, 10.0);
        assert!((val - generation_cost(&net, &gen)).abs() < 1e-12);
    }

    #[test]
    fn partial_lagrangian_reduces_to_cost() {
        let net = three_bus_loop();
        let load = nominal_load(&net);
        let x = OperatingPoint {
            v: vec![1.02, 1.0, 0.97],
            theta: vec![0.0, 0.02, -0.07],
        };
        let gen = implied_dispatch(&net, &x, &load);
        let cost = generation_cost(&net, &gen);
        let (v0, _) = partial_lagrangian(&net, &x, &gen, &load, &DualVector::zeros(3));
        assert!((v0 - cost).abs() < 1e-12);

        // Balanced everywhere once bus 2's demand matches its outflow.
        let (rp, rq) = balance_residuals(&net, &x, &load, &gen);
        let balanced = LoadProfile {
            p: load.p.iter().zip(&rp).map(|(l, r)| l - r).collect(),
            q: load.q.iter().zip(&rq).map(|(l, r)| l - r).collect(),
        };
        let mu = DualVector {
            mu_p: vec![3.0, -1.0, 7.5],
            mu_q: vec![0.2, 4.0, -2.0],
        };
        let (v1, _) = partial_lagrangian(&net, &x, &gen, &balanced, &mu);
        assert!((v1 - cost).abs() < 1e-12);
    }

    #[test]
    fn flow_limits_add_constraints() {
        let mut net = three_bus_loop();
        let mut branches = net.branches().to_vec();
        branches[1].s_max = Some(0.5);
        net = Network::new(100.0, net.buses().to_vec(), branches, net.generators().to_vec()).unwrap();
        let set = ConstraintSet::new(&net);
        assert_eq!(set.len(), 2 * 3 + 2);
        assert_eq!(set.hi[6], 0.25);
        assert_eq!(
            set.kinds[7],
            ConstraintKind::Flow {
                branch: 1,
                reverse: true
            }
        );
    }

    use crate::network::Network;
    use crate::synthetic::{random_network, random_point};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central differences over `(v, theta)` with the slack angle held fixed.
    fn numeric_grad(x: &OperatingPoint, slack: usize, f: impl Fn(&OperatingPoint) -> f64) -> PointGradient {
        let h = 1e-6;
        let n = x.n_bus();
        let mut g = PointGradient {
            v: vec![0.0; n],
            theta: vec![0.0; n],
        };
        for i in 0..n {
            let mut a = x.clone();
            let mut b = x.clone();
            a.v[i] += h;
            b.v[i] -= h;
            g.v[i] = (f(&a) - f(&b)) / (2.0 * h);
            if i != slack {
                let mut a = x.clone();
                let mut b = x.clone();
                a.theta[i] += h;
                b.theta[i] -= h;
                g.theta[i] = (f(&a) - f(&b)) / (2.0 * h);
            }
        }
        g
    }

    fn rel_err(a: &[f64], b: &[f64]) -> f64 {
        let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.abs()));
        diff / scale
    }

    #[test]
    fn penalized_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..30 {
            let n = rng.random_range(2..=8);
            let net = random_network(n, &mut rng);
            let x = random_point(&net, &mut rng);
            let load = nominal_load(&net);
            let rho = rng.random_range(1.0..100.0);
            let (_, g) = penalized_objective(&net, &x, &load, rho);
            let fd = numeric_grad(&x, net.slack(), |p| penalized_objective(&net, p, &load, rho).0);
            assert!(rel_err(&g.v, &fd.v) < 1e-6);
            assert!(rel_err(&g.theta, &fd.theta) < 1e-6);
        }
    }

    #[test]
    fn augmented_gradient_with_multipliers() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..20 {
            let net = random_network(rng.random_range(2..=6), &mut rng);
            let set = ConstraintSet::new(&net);
            let lambda: Vec<f64> = (0..set.len()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = random_point(&net, &mut rng);
            let load = nominal_load(&net);
            let f = |p: &OperatingPoint| augmented_objective(&net, &set, p, &load, &lambda, 30.0, 0.1);
            let fd = numeric_grad(&x, net.slack(), |p| f(p).0);
            let (_, g) = f(&x);
            assert!(rel_err(&g.v, &fd.v) < 1e-6);
            assert!(rel_err(&g.theta, &fd.theta) < 1e-6);
        }
    }

    #[test]
    fn partial_lagrangian_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..30 {
            let net = random_network(rng.random_range(2..=8), &mut rng);
            let n = net.n_bus();
            let x = random_point(&net, &mut rng);
            let load = nominal_load(&net);
            let mut gen = GenDispatch::zeros(n);
            for i in net.generator_buses() {
                gen.p[i] = rng.random_range(0.0..2.0);
                gen.q[i] = rng.random_range(-1.0..1.0);
            }
            let mu = DualVector {
                mu_p: (0..n).map(|_| rng.random_range(0.0..40.0)).collect(),
                mu_q: (0..n).map(|_| rng.random_range(-5.0..5.0)).collect(),
            };
            let (_, g) = partial_lagrangian(&net, &x, &gen, &load, &mu);
            let fd = numeric_grad(&x, net.slack(), |p| partial_lagrangian(&net, p, &gen, &load, &mu).0);
            assert!(rel_err(&g.v, &fd.v) < 1e-6);
            assert!(rel_err(&g.theta, &fd.theta) < 1e-6);
            let h = 1e-6;
            for i in net.generator_buses() {
                let mut a = gen.clone();
                let mut b = gen.clone();
                a.p[i] += h;
                b.p[i] -= h;
                let fd_p = (partial_lagrangian(&net, &x, &a, &load, &mu).0
                    - partial_lagrangian(&net, &x, &b, &load, &mu).0)
                    / (2.0 * h);
                assert!((fd_p - g.p[i]).abs() < 1e-6 * fd_p.abs().max(1.0));
            }
        }
    }

    #[test]
    fn objectives_invariant_under_angle_shift() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let net = random_network(6, &mut rng);
        let x = random_point(&net, &mut rng);
        let load = nominal_load(&net);
        let mut shifted = x.clone();
        for t in &mut shifted.theta {
            *t += 0.7;
        }
        let a = penalized_objective(&net, &x, &load, 10.0).0;
        let b = penalized_objective(&net, &shifted, &load, 10.0).0;
        assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }
}
