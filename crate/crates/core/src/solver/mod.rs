//! Solvers for the full problem, the partial Lagrangian subproblem and plain
//! power flow, plus multi-start discovery of distinct local solutions.

mod acopf;
mod lagrangian;
mod lbfgs;
mod multistart;
mod power_flow;

pub use acopf::solve_acopf;
pub use lagrangian::{best_dispatch, solve_partial_lagrangian};
pub use multistart::{multi_start, random_start, Cluster};
pub use power_flow::solve_power_flow;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::opf::{DualVector, GenDispatch, OperatingPoint};

/// How random initial points are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RandomStart {
    /// Magnitudes uniform in their bounds, angles uniform on the circle.
    #[default]
    Uniform,
    /// Magnitudes `N(1, 0.05)` clipped to bounds, angles `N(0, 0.5)`.
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub rho_init: f64,
    pub rho_growth: f64,
    /// Largest allowed constraint violation at convergence.
    pub tol_residual: f64,
    /// Projected-gradient tolerance of each inner minimization.
    pub tol_grad: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    pub seed: u64,
    pub random_start: RandomStart,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            rho_init: 10.0,
            rho_growth: 10.0,
            tol_residual: 1e-8,
            tol_grad: 1e-6,
            max_outer: 50,
            max_inner: 500,
            seed: 0,
            random_start: RandomStart::Uniform,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: &str| Err(SolverError::Config(msg.to_string()));
        if !(self.rho_init > 0.0) {
            return bad("rho_init must be positive");
        }
        if !(self.rho_growth > 1.0) {
            return bad("rho_growth must exceed 1");
        }
        if !(self.tol_residual > 0.0 && self.tol_grad > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return bad("iteration caps must be positive");
        }
        Ok(())
    }

    /// Reads a TOML table; missing keys keep their defaults.
    pub fn from_toml(text: &str) -> Result<Self, SolverError> {
        let cfg: SolverConfig = toml::from_str(text).map_err(|e| SolverError::Config(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Diverged,
}

/// Where a solve was initialized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    Flat,
    Random,
    Learned,
    File,
    Given,
}

impl StartKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            StartKind::Flat => "flat",
            StartKind::Random => "random",
            StartKind::Learned => "learned",
            StartKind::File => "file",
            StartKind::Given => "given",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveResult {
    pub point: OperatingPoint,
    pub gen: GenDispatch,
    pub duals: DualVector,
    pub cost: f64,
    pub status: SolveStatus,
    /// Inner iterations summed over all outer iterations.
    pub iterations: usize,
    pub outer_iterations: usize,
    /// Largest constraint violation at the returned point.
    pub violation: f64,
    pub wall_time: f64,
    pub start: StartKind,
}

impl SolveResult {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }
}

/// One line of a solve log: the result tagged with the network it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveRecord {
    pub fingerprint: String,
    #[serde(flatten)]
    pub result: SolveResult,
}

impl SolveRecord {
    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("solve record serializes")
    }

    pub fn from_json_line(line: &str) -> Result<Self, SolverError> {
        serde_json::from_str(line).map_err(|e| SolverError::Record(e.to_string()))
    }
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("singular Jacobian at iteration {0}")]
    SingularJacobian(usize),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("iteration diverged (residual {0:.3e})")]
    Diverged(f64),
    #[error("malformed solve record: {0}")]
    Record(String),
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_from_toml_keeps_defaults() {
        let cfg = SolverConfig::from_toml("rho_init = 5.0\nseed = 3\n").unwrap();
        assert_eq!(cfg.rho_init, 5.0);
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.max_inner, SolverConfig::default().max_inner);
    }

    #[test]
    fn config_rejects_bad_values() {
        assert!(SolverConfig::from_toml("rho_growth = 1.0").is_err());
        assert!(SolverConfig::from_toml("tol_grad = 0.0").is_err());
        assert!(SolverConfig::from_toml("unknown = 1").is_err());
    }

    #[test]
    fn record_round_trip() {
        let rec = SolveRecord {
            fingerprint: "ab".into(),
            result: SolveResult {
                point: OperatingPoint {
                    v: vec![1.0, 0.95],
                    theta: vec![0.0, -0.1234567890123],
                },
                gen: GenDispatch::zeros(2),
                duals: DualVector::zeros(2),
                cost: 1.5,
                status: SolveStatus::Converged,
                iterations: 12,
                outer_iterations: 3,
                violation: 1e-10,
                wall_time: 0.01,
                start: StartKind::Flat,
            },
        };
        let line = rec.to_json_line();
        assert!(!line.contains('\n'));
        assert_eq!(SolveRecord::from_json_line(&line).unwrap(), rec);
    }
}
