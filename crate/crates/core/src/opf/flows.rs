use crate::network::{Branch, LoadProfile, Network};

use super::{check_dims, GenDispatch, OperatingPoint};

/// Flow leaving bus `i` towards bus `j` and its partial derivatives with
/// respect to `[v_i, v_j, theta_i, theta_j]`.
#[derive(Debug, Clone, Copy)]
pub(crate) struct DirectedFlow {
    pub p: f64,
    pub q: f64,
    pub dp: [f64; 4],
    pub dq: [f64; 4],
}

pub(crate) fn directed_flow(br: &Branch, vi: f64, vj: f64, ti: f64, tj: f64) -> DirectedFlow {
    let (g, b, bh) = (br.g, br.b, br.b_hat());
    let (s, c) = (ti - tj).sin_cos();
    let re = g * c - b * s;
    let im = b * c + g * s;
    let vv = vi * vj;
    DirectedFlow {
        p: vi * vi * g - vv * re,
        q: vi * vi * bh - vv * im,
        dp: [
            2.0 * vi * g - vj * re,
            -vi * re,
            vv * (g * s + b * c),
            -vv * (g * s + b * c),
        ],
        dq: [
            2.0 * vi * bh - vj * im,
            -vi * im,
            vv * (b * s - g * c),
            -vv * (b * s - g * c),
        ],
    }
}

/// Both directed flows of one branch.
pub(crate) fn branch_pair(br: &Branch, x: &OperatingPoint) -> (DirectedFlow, DirectedFlow) {
    let (i, j) = (br.from, br.to);
    (
        directed_flow(br, x.v[i], x.v[j], x.theta[i], x.theta[j]),
        directed_flow(br, x.v[j], x.v[i], x.theta[j], x.theta[i]),
    )
}

/// Directed flows on every branch. Out-of-service branches carry zero.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchFlow {
    /// From-bus to to-bus.
    pub p_from: Vec<f64>,
    pub q_from: Vec<f64>,
    /// To-bus to from-bus.
    pub p_to: Vec<f64>,
    pub q_to: Vec<f64>,
}

pub fn branch_flows(net: &Network, x: &OperatingPoint) -> BranchFlow {
    let m = net.branches().len();
    let mut out = BranchFlow {
        p_from: vec![0.0; m],
        q_from: vec![0.0; m],
        p_to: vec![0.0; m],
        q_to: vec![0.0; m],
    };
    for (k, br) in net.branches().iter().enumerate() {
        if !br.in_service {
            continue;
        }
        let (f, t) = branch_pair(br, x);
        out.p_from[k] = f.p;
        out.q_from[k] = f.q;
        out.p_to[k] = t.p;
        out.q_to[k] = t.q;
    }
    out
}

/// Net flow leaving each bus, summed over incident in-service branches.
pub fn bus_injections(net: &Network, x: &OperatingPoint) -> (Vec<f64>, Vec<f64>) {
    let n = net.n_bus();
    let mut p = vec![0.0; n];
    let mut q = vec![0.0; n];
    for br in net.in_service_branches() {
        let (f, t) = branch_pair(br, x);
        p[br.from] += f.p;
        q[br.from] += f.q;
        p[br.to] += t.p;
        q[br.to] += t.q;
    }
    (p, q)
}

/// `load + injection - generation` per bus; zero means balanced.
pub fn balance_residuals(
    net: &Network,
    x: &OperatingPoint,
    load: &LoadProfile,
    gen: &GenDispatch,
) -> (Vec<f64>, Vec<f64>) {
    check_dims(net, x, load);
    let (pi, qi) = bus_injections(net, x);
    let rp = (0..net.n_bus()).map(|i| load.p[i] + pi[i] - gen.p[i]).collect();
    let rq = (0..net.n_bus()).map(|i| load.q[i] + qi[i] - gen.q[i]).collect();
    (rp, rq)
}

/// Generation that zeroes the residual at every generator bus. Buses without
/// a generator keep zero dispatch, so their residual still reports imbalance.
pub fn implied_dispatch(net: &Network, x: &OperatingPoint, load: &LoadProfile) -> GenDispatch {
    check_dims(net, x, load);
    let (pi, qi) = bus_injections(net, x);
    let mut gen = GenDispatch::zeros(net.n_bus());
    for i in net.generator_buses() {
        gen.p[i] = load.p[i] + pi[i];
        gen.q[i] = load.q[i] + qi[i];
    }
    gen
}

/// Total generation cost over generator buses.
pub fn generation_cost(net: &Network, gen: &GenDispatch) -> f64 {
    net.generators().iter().map(|g| g.cost.eval(gen.p[g.bus])).sum()
}
