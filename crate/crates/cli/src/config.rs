//! Run configuration: an optional TOML file overlaid by command-line flags.
//!
//! Precedence, lowest first: built-in defaults, the `--config` file, flags.
//! The top-level `seed` (or `--seed`) replaces every section seed so that all
//! randomness in a run flows from one number.

use std::path::Path;

use anyhow::{Context, Result};
use lagopf::dataset::DatasetSpec;
use lagopf::mlp::TrainConfig;
use lagopf::solver::SolverConfig;
use serde::Deserialize;

use crate::fail;

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TwoBusSection {
    pub rho: f64,
    /// Empty means the two root multipliers and their midpoint.
    pub mus: Vec<f64>,
    pub resolution: usize,
}

impl Default for TwoBusSection {
    fn default() -> Self {
        Self {
            rho: 2.0,
            mus: Vec::new(),
            resolution: 1000,
        }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub k_starts: Option<usize>,
    pub solver: SolverConfig,
    pub dataset: DatasetSpec,
    /// Kept raw so an absent `hidden_width` can fall back to the case size.
    pub train: Option<toml::Table>,
    pub twobus: TwoBusSection,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .map_err(|e| fail("config", format!("cannot read config file {}: {e}", path.display())))?;
        let cfg: RunConfig =
            toml::from_str(&text).map_err(|e| fail("config", format!("{}: {}", path.display(), e.message())))?;
        Ok(cfg)
    }

    /// The flag wins over the file; the seed is mandatory when `required`.
    pub fn seed(&self, flag: Option<u64>, required: bool) -> Result<u64> {
        match flag.or(self.seed) {
            Some(s) => Ok(s),
            None if required => Err(fail(
                "config",
                "a seed is required (--seed or `seed` in the config file)",
            )),
            None => Ok(0),
        }
    }

    pub fn k_starts(&self, flag: Option<usize>) -> Result<usize> {
        let k = flag.or(self.k_starts).unwrap_or(10);
        if k == 0 {
            return Err(fail("config", "k-starts must be positive"));
        }
        Ok(k)
    }

    pub fn solver(&self, seed: u64, rho: Option<f64>) -> Result<SolverConfig> {
        let mut cfg = SolverConfig {
            seed,
            ..self.solver.clone()
        };
        if let Some(r) = rho {
            cfg.rho_init = r;
        }
        cfg.validate().context("solver configuration")?;
        Ok(cfg)
    }

    /// `width` and `epochs` are flag overrides; the width defaults by case
    /// size when neither the flag nor the file sets it.
    pub fn train(&self, n_bus: usize, seed: u64, width: Option<usize>, epochs: Option<usize>) -> Result<TrainConfig> {
        let table = self.train.clone().unwrap_or_default();
        let file_width = table.contains_key("hidden_width");
        let mut cfg: TrainConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| fail("config", format!("[train]: {}", e.message())))?;
        if !file_width {
            cfg.hidden_width = TrainConfig::default_width(n_bus);
        }
        if let Some(w) = width {
            cfg.hidden_width = w;
        }
        if let Some(e) = epochs {
            cfg.epochs = e;
        }
        cfg.seed = seed;
        cfg.validate().context("training configuration")?;
        Ok(cfg)
    }
}
