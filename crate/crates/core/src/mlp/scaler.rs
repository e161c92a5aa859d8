use serde::{Deserialize, Serialize};

use super::MlpError;

/// Per-feature standardization `(x - shift) / scale`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub shift: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Scaler {
    pub fn identity(dim: usize) -> Self {
        Self {
            shift: vec![0.0; dim],
            scale: vec![1.0; dim],
        }
    }

    /// Mean and standard deviation of each column. Constant columns get a
    /// unit scale so they map to zero instead of blowing up.
    pub fn fit(rows: &[Vec<f64>]) -> Result<Self, MlpError> {
        let Some(first) = rows.first() else {
            return Err(MlpError::Shape("cannot fit a scaler on no rows".into()));
        };
        let dim = first.len();
        let n = rows.len() as f64;
        let mut shift = vec![0.0; dim];
        for r in rows {
            if r.len() != dim {
                return Err(MlpError::Dimension {
                    expected: dim,
                    got: r.len(),
                });
            }
            for (s, v) in shift.iter_mut().zip(r) {
                *s += v / n;
            }
        }
        let mut var = vec![0.0; dim];
        for r in rows {
            for ((s, v), m) in var.iter_mut().zip(r).zip(&shift) {
                *s += (v - m) * (v - m) / n;
            }
        }
        let scale = var
            .iter()
            .zip(&shift)
            .map(|(v, m)| {
                let sd = v.sqrt();
                if sd > 1e-9 * m.abs().max(1.0) {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { shift, scale })
    }

    pub fn dim(&self) -> usize {
        self.shift.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn invert(&self, z: &[f64]) -> Vec<f64> {
        z.iter()
            .zip(&self.shift)
            .zip(&self.scale)
            .map(|((v, m), s)| v * s + m)
            .collect()
    }

    pub(crate) fn is_valid(&self) -> bool {
        self.shift.len() == self.scale.len()
            && self.shift.iter().all(|v| v.is_finite())
            && self.scale.iter().all(|s| s.is_finite() && *s > 0.0)
    }
}

/// Scalers for network inputs and for regression targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerPair {
    pub input: Scaler,
    pub target: Scaler,
}
