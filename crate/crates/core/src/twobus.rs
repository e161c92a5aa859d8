//! The two-bus example in closed form: one generator bus feeding a single
//! load over a lossy line, with unit voltages and reactive power ignored.
//!
//! `theta` is the angle of the generator bus relative to the load bus.
//! Everything here is scalar and exact, which makes it the reference the
//! network solvers are checked against.

use std::f64::consts::PI;
use std::fmt::Write as _;

use thiserror::Error;

use crate::network::{Branch, Bus, BusKind, CostPolynomial, Generator, Network};

#[derive(Debug, Error, PartialEq)]
pub enum TwoBusError {
    #[error("line conductance must be positive for the multiplier map")]
    NonPositiveConductance,
    #[error("mu + c'(P) vanished at theta = {0}")]
    VanishingDenominator(f64),
    #[error("fixed-point iteration did not converge in {0} steps")]
    NoConvergence(usize),
    #[error("expected two roots of the balance equation, found {0}")]
    RootCount(usize),
    #[error("both roots have the same cost; the global solution is ambiguous")]
    AmbiguousGlobal,
    #[error("landscape resolution must be at least 100, got {0}")]
    Resolution(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBusParams {
    pub g: f64,
    pub b: f64,
    pub cost: CostPolynomial,
    /// Active load at the second bus.
    pub load: f64,
}

impl TwoBusParams {
    /// `g = 1`, `b = 5`, `c(P) = P^2 + P`, load 0.8: two roots with clearly
    /// different costs.
    pub fn canonical() -> Self {
        Self {
            g: 1.0,
            b: 5.0,
            cost: CostPolynomial::new(0.0, 1.0, 1.0),
            load: 0.8,
        }
    }

    /// Power leaving the generator bus.
    pub fn generation(&self, theta: f64) -> f64 {
        self.g - self.g * theta.cos() + self.b * theta.sin()
    }

    /// The same system as a network: the slack generator at bus 0 and the
    /// load at bus 1, both magnitudes pinned to one. Bus 1 carries a
    /// zero-cost synchronous condenser so its reactive balance is free, as in
    /// the scalar model. Bus 1's angle is `-theta`.
    pub fn to_network(&self) -> Network {
        self.to_network_capped(10.0)
    }

    /// As [`TwoBusParams::to_network`] with the generator limited to `p_max`.
    /// A cap below the costlier root's generation leaves a single solution.
    pub fn to_network_capped(&self, p_max: f64) -> Network {
        let bus = |id: usize, kind: BusKind, p_load: f64| Bus {
            id,
            label: id as u64 + 1,
            kind,
            v_min: 1.0,
            v_max: 1.0,
            p_load,
            q_load: 0.0,
        };
        Network::new(
            100.0,
            vec![bus(0, BusKind::Slack, 0.0), bus(1, BusKind::Generator, self.load)],
            vec![Branch {
                from: 0,
                to: 1,
                g: self.g,
                b: self.b,
                b_charge: 0.0,
                s_max: None,
                in_service: true,
            }],
            vec![
                Generator {
                    bus: 0,
                    p_min: 0.0,
                    p_max,
                    q_min: -20.0,
                    q_max: 20.0,
                    cost: self.cost,
                },
                Generator {
                    bus: 1,
                    p_min: 0.0,
                    p_max: 0.0,
                    q_min: -50.0,
                    q_max: 50.0,
                    cost: CostPolynomial::default(),
                },
            ],
        )
        .expect("two-bus network is well formed")
    }
}

/// `l + g - g cos(theta) - b sin(theta)`; zero on a feasible point.
pub fn balance_residual(p: &TwoBusParams, theta: f64) -> f64 {
    p.load + p.g - p.g * theta.cos() - p.b * theta.sin()
}

/// Cost plus `rho/2` times the squared balance residual.
pub fn penalized(p: &TwoBusParams, theta: f64, rho: f64) -> f64 {
    let r = balance_residual(p, theta);
    p.cost.eval(p.generation(theta)) + 0.5 * rho * r * r
}

/// Cost plus `mu` times the balance residual.
pub fn lagrangian(p: &TwoBusParams, theta: f64, mu: f64) -> f64 {
    p.cost.eval(p.generation(theta)) + mu * balance_residual(p, theta)
}

/// Derivative of [`lagrangian`] in `theta`:
/// `(c' + mu) g sin(theta) + (c' - mu) b cos(theta)`.
pub fn stationarity(p: &TwoBusParams, theta: f64, mu: f64) -> f64 {
    let c = p.cost.derivative(p.generation(theta));
    (c + mu) * p.g * theta.sin() + (c - mu) * p.b * theta.cos()
}

fn map_step(p: &TwoBusParams, theta: f64, mu: f64) -> Result<f64, TwoBusError> {
    let c = p.cost.derivative(p.generation(theta));
    let den = mu + c;
    if den.abs() < 1e-12 {
        return Err(TwoBusError::VanishingDenominator(theta));
    }
    Ok(((mu - c) / den * p.b / p.g).atan())
}

/// Interior minimizer of the Lagrangian for multiplier `mu`, the solution of
/// `theta = atan((mu - c') / (mu + c') * b / g)` with `c'` taken at the
/// generation `theta` implies.
///
/// Linear costs make the right side constant. Otherwise a damped fixed-point
/// iteration runs from zero. The damping starts at one half, is halved
/// whenever a step fails to shrink the fixed-point residual, and otherwise
/// follows a secant estimate of the map's slope.
pub fn minimizer_map(p: &TwoBusParams, mu: f64) -> Result<f64, TwoBusError> {
    if !(p.g > 0.0) {
        return Err(TwoBusError::NonPositiveConductance);
    }
    if p.cost.c2 == 0.0 {
        return map_step(p, 0.0, mu);
    }
    const MAX_ITER: usize = 1000;
    let mut theta = 0.0;
    let mut damping = 0.5;
    let mut gap = map_step(p, theta, mu)? - theta;
    for _ in 0..MAX_ITER {
        let next = theta + damping * gap;
        let next_gap = map_step(p, next, mu)? - next;
        if next_gap.abs() >= gap.abs() && damping > 1e-6 {
            damping *= 0.5;
            continue;
        }
        // The residual's secant slope is F' - 1; damping 1 / (1 - F')
        // would land on the fixed point of the linearized map.
        if next != theta {
            let slope = (next_gap - gap) / (next - theta);
            if slope < 0.0 {
                damping = (-1.0 / slope).min(0.5);
            }
        }
        let step = (next - theta).abs();
        theta = next;
        gap = next_gap;
        if step < 1e-12 && gap.abs() < 1e-12 {
            return Ok(theta);
        }
    }
    Err(TwoBusError::NoConvergence(MAX_ITER))
}

/// Both feasible angles with their costs and the multipliers that make each
/// a stationary point of the Lagrangian.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoBusSolutions {
    pub theta_global: f64,
    pub theta_local: f64,
    pub mu_global: f64,
    pub mu_local: f64,
    pub cost_global: f64,
    pub cost_local: f64,
}

fn bisect(p: &TwoBusParams, mut a: f64, mut b: f64) -> f64 {
    let mut fa = balance_residual(p, a);
    while b - a > 1e-12 {
        let m = 0.5 * (a + b);
        let fm = balance_residual(p, m);
        if fm == 0.0 {
            return m;
        }
        if (fm < 0.0) == (fa < 0.0) {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

/// Locates the roots of the balance equation on a 10^4-point grid over
/// `[-pi, pi]` and refines each by bisection.
pub fn find_solutions(p: &TwoBusParams) -> Result<TwoBusSolutions, TwoBusError> {
    const GRID: usize = 10_000;
    let at = |k: usize| -PI + 2.0 * PI * k as f64 / GRID as f64;
    let mut roots = Vec::new();
    for k in 0..GRID {
        let (a, b) = (at(k), at(k + 1));
        let (fa, fb) = (balance_residual(p, a), balance_residual(p, b));
        if fa == 0.0 {
            roots.push(a);
        } else if (fa < 0.0) != (fb < 0.0) && fb != 0.0 {
            roots.push(bisect(p, a, b));
        }
    }
    if roots.len() != 2 {
        return Err(TwoBusError::RootCount(roots.len()));
    }
    let cost = |t: f64| p.cost.eval(p.generation(t));
    let (c0, c1) = (cost(roots[0]), cost(roots[1]));
    if (c0 - c1).abs() <= 1e-12 * c0.abs().max(c1.abs()).max(1.0) {
        return Err(TwoBusError::AmbiguousGlobal);
    }
    let (tg, tl) = if c0 < c1 {
        (roots[0], roots[1])
    } else {
        (roots[1], roots[0])
    };
    let mu = |t: f64| {
        let c = p.cost.derivative(p.generation(t));
        c * (p.g * t.sin() + p.b * t.cos()) / (p.b * t.cos() - p.g * t.sin())
    };
    Ok(TwoBusSolutions {
        theta_global: tg,
        theta_local: tl,
        mu_global: mu(tg),
        mu_local: mu(tl),
        cost_global: cost(tg),
        cost_local: cost(tl),
    })
}

/// Local minimum of the penalized objective reached by descent from
/// `theta0`, followed as the penalty grows from `rho` to `1e8`. The end point
/// is a root of the balance equation, so this tells which basin `theta0`
/// belongs to.
pub fn penalty_descent(p: &TwoBusParams, theta0: f64, rho: f64) -> f64 {
    let mut theta = theta0;
    let mut rho = rho;
    loop {
        theta = downhill_minimum(|t| penalized(p, t, rho), theta);
        if rho >= 1e8 {
            return theta;
        }
        rho *= 10.0;
    }
}

/// Walks downhill from `x0` with growing steps until the function rises,
/// then refines the bracketed minimum by golden-section search.
fn downhill_minimum(f: impl Fn(f64) -> f64, x0: f64) -> f64 {
    let h = 1e-7;
    let dir = if f(x0 + h) < f(x0) {
        1.0
    } else if f(x0 - h) < f(x0) {
        -1.0
    } else {
        return x0;
    };
    let (mut a, mut m) = (x0, x0 + dir * h);
    let mut step = 2.0 * h;
    let mut b = m + dir * step;
    while f(b) < f(m) {
        a = m;
        m = b;
        step *= 2.0;
        b = m + dir * step;
    }
    let (mut lo, mut hi) = if a < b { (a, b) } else { (b, a) };
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    while hi - lo > 1e-12 {
        let c = hi - gr * (hi - lo);
        let d = lo + gr * (hi - lo);
        if f(c) < f(d) {
            hi = d;
        } else {
            lo = c;
        }
    }
    0.5 * (lo + hi)
}

/// Landscape samples of the penalized objective and of the Lagrangian for
/// several multipliers.
#[derive(Debug, Clone, PartialEq)]
pub struct Landscape {
    pub rho: f64,
    pub mus: Vec<f64>,
    /// Rows of `[theta, penalized, lagrangian(mu_0), ...]`.
    pub rows: Vec<Vec<f64>>,
}

impl Landscape {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("theta,penalized");
        for k in 0..self.mus.len() {
            write!(out, ",lagrangian_{k}").unwrap();
        }
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|x| format!("{x:e}")).collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

/// `resolution + 1` evenly spaced samples over `[-pi, pi]`.
pub fn sweep_landscape(p: &TwoBusParams, rho: f64, mus: &[f64], resolution: usize) -> Result<Landscape, TwoBusError> {
    if resolution < 100 {
        return Err(TwoBusError::Resolution(resolution));
    }
    let rows = (0..=resolution)
        .map(|k| {
            let t = -PI + 2.0 * PI * k as f64 / resolution as f64;
            let mut row = vec![t, penalized(p, t, rho)];
            row.extend(mus.iter().map(|&m| lagrangian(p, t, m)));
            row
        })
        .collect();
    Ok(Landscape {
        rho,
        mus: mus.to_vec(),
        rows,
    })
}

/// Interior local minima of a sampled curve, refined by golden-section search.
pub fn local_minima(f: impl Fn(f64) -> f64, lo: f64, hi: f64, samples: usize) -> Vec<f64> {
    let xs: Vec<f64> = (0..=samples)
        .map(|k| lo + (hi - lo) * k as f64 / samples as f64)
        .collect();
    let ys: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let gr = (5f64.sqrt() - 1.0) / 2.0;
    let mut out = Vec::new();
    for k in 1..samples {
        if ys[k] < ys[k - 1] && ys[k] <= ys[k + 1] {
            let (mut a, mut b) = (xs[k - 1], xs[k + 1]);
            while b - a > 1e-10 {
                let c = b - gr * (b - a);
                let d = a + gr * (b - a);
                if f(c) < f(d) {
                    b = d;
                } else {
                    a = c;
                }
            }
            out.push(0.5 * (a + b));
        }
    }
    out
}
