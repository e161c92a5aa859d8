//! Power flows, balance residuals and the objective functions built on them.
//!
//! Everything here is a pure function of an immutable [`Network`](crate::network::Network)
//! and the point being evaluated.

mod flows;
mod objective;

pub(crate) use flows::directed_flow;
pub use flows::{balance_residuals, branch_flows, bus_injections, generation_cost, implied_dispatch, BranchFlow};
pub use objective::{
    augmented_objective, constraint_values, partial_lagrangian, penalized_objective, range_penalty, ConstraintKind,
    ConstraintSet, LagrangianGradient, PointGradient,
};
pub(crate) use objective::{first_order_data, lagrangian_network_part};

use serde::{Deserialize, Serialize};

use crate::network::{LoadProfile, Network};

/// Voltage magnitudes and angles (radians) for every bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OperatingPoint {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
}

impl OperatingPoint {
    /// All magnitudes at 1 p.u. (projected into bounds), all angles zero.
    pub fn flat(net: &Network) -> Self {
        Self {
            v: net.buses().iter().map(|b| 1.0_f64.clamp(b.v_min, b.v_max)).collect(),
            theta: vec![0.0; net.n_bus()],
        }
    }

    pub fn n_bus(&self) -> usize {
        self.v.len()
    }

    /// Shifts all angles so the slack angle is zero, then wraps into (-π, π].
    pub fn normalized(mut self, slack: usize) -> Self {
        let shift = self.theta[slack];
        for t in &mut self.theta {
            *t = wrap_angle(*t - shift);
        }
        self
    }

    /// Clips magnitudes into the network's voltage bounds.
    pub fn clip_voltages(&mut self, net: &Network) {
        for (v, bus) in self.v.iter_mut().zip(net.buses()) {
            *v = v.clamp(bus.v_min, bus.v_max);
        }
    }

    /// Largest coordinate difference, comparing angles on the circle.
    pub fn distance_inf(&self, other: &OperatingPoint) -> f64 {
        let dv = self.v.iter().zip(&other.v).map(|(a, b)| (a - b).abs());
        let dt = self
            .theta
            .iter()
            .zip(&other.theta)
            .map(|(a, b)| wrap_angle(a - b).abs());
        dv.chain(dt).fold(0.0, f64::max)
    }

    /// `[v..., theta without slack...]`, the layout regressed by the
    /// Lagrangian network.
    pub fn to_features(&self, slack: usize) -> Vec<f64> {
        let mut out = self.v.clone();
        out.extend(
            self.theta
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != slack)
                .map(|(_, t)| *t),
        );
        out
    }

    /// Inverse of [`OperatingPoint::to_features`]; the slack angle is set to zero.
    pub fn from_features(features: &[f64], n: usize, slack: usize) -> Self {
        assert_eq!(features.len(), 2 * n - 1, "feature length");
        let v = features[..n].to_vec();
        let mut theta = Vec::with_capacity(n);
        let mut rest = features[n..].iter();
        for i in 0..n {
            theta.push(if i == slack { 0.0 } else { *rest.next().unwrap() });
        }
        Self { v, theta }
    }
}

/// Wraps an angle into (-π, π].
pub fn wrap_angle(t: f64) -> f64 {
    use std::f64::consts::PI;
    let mut w = t.rem_euclid(2.0 * PI);
    if w > PI {
        w -= 2.0 * PI;
    }
    w
}

/// Active and reactive generation per bus; zero where there is no generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenDispatch {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

impl GenDispatch {
    pub fn zeros(n: usize) -> Self {
        Self {
            p: vec![0.0; n],
            q: vec![0.0; n],
        }
    }
}

/// Multipliers on the active and reactive balance constraints, per bus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualVector {
    pub mu_p: Vec<f64>,
    pub mu_q: Vec<f64>,
}

impl DualVector {
    pub fn zeros(n: usize) -> Self {
        Self {
            mu_p: vec![0.0; n],
            mu_q: vec![0.0; n],
        }
    }

    pub fn to_features(&self) -> Vec<f64> {
        let mut out = self.mu_p.clone();
        out.extend_from_slice(&self.mu_q);
        out
    }

    pub fn from_features(features: &[f64]) -> Self {
        let n = features.len() / 2;
        Self {
            mu_p: features[..n].to_vec(),
            mu_q: features[n..].to_vec(),
        }
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &DualVector, t: f64) -> DualVector {
        let mix = |a: &[f64], b: &[f64]| -> Vec<f64> { a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect() };
        DualVector {
            mu_p: mix(&self.mu_p, &other.mu_p),
            mu_q: mix(&self.mu_q, &other.mu_q),
        }
    }
}

pub(crate) fn check_dims(net: &Network, x: &OperatingPoint, load: &LoadProfile) {
    let n = net.n_bus();
    debug_assert_eq!(x.v.len(), n);
    debug_assert_eq!(x.theta.len(), n);
    debug_assert_eq!(load.p.len(), n);
    debug_assert_eq!(load.q.len(), n);
}
