//! Load sampling, multi-start labeling, local/global mixing and the dataset
//! file format.
//!
//! A dataset file starts with one comment line
//! `# lagopf-dataset v1 buses=<n> fingerprint=<hex>`, then a CSV header and
//! one row per sample. Columns are bus-major blocks `p_load_<i>`,
//! `q_load_<i>`, `v_<i>`, `theta_<i>`, `pg_<i>`, `qg_<i>`, `mu_p_<i>`,
//! `mu_q_<i>`, followed by `cost`, `label` and `cluster_rank`.

use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::network::{nominal_load, LoadProfile, Network};
use crate::opf::{DualVector, GenDispatch, OperatingPoint};
use crate::solver::{multi_start, SolverConfig};

const MAGIC: &str = "# lagopf-dataset v1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("dataset was built for network {found}, expected {expected}")]
    Fingerprint { expected: String, found: String },
    #[error("cannot reach local fraction {target}: {available} of {loads} loads have a {kind} sample")]
    Insufficient {
        target: f64,
        kind: Label,
        available: usize,
        loads: usize,
    },
    #[error("invalid dataset spec: {0}")]
    Spec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Global,
    Local,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Global => "global",
            Label::Local => "local",
        })
    }
}

/// One converged solution for one load.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub load: LoadProfile,
    pub point: OperatingPoint,
    pub gen: GenDispatch,
    pub duals: DualVector,
    pub cost: f64,
    pub label: Label,
    /// Position of this solution's cluster when sorted by cost; 0 is global.
    pub cluster_rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n_bus: usize,
    pub fingerprint: String,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetSpec {
    pub n_samples: usize,
    pub load_variation_pct: f64,
    pub local_fraction: f64,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            n_samples: 500,
            load_variation_pct: 1.0,
            local_fraction: 0.0,
            train_fraction: 0.9,
            seed: 0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.n_samples < 10 {
            return Err(DatasetError::Spec("n_samples must be at least 10".into()));
        }
        if !(0.0..=50.0).contains(&self.load_variation_pct) {
            return Err(DatasetError::Spec("load_variation_pct must lie in [0, 50]".into()));
        }
        if !(0.0..=1.0).contains(&self.local_fraction) {
            return Err(DatasetError::Spec("local_fraction must lie in [0, 1]".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(DatasetError::Spec("train_fraction must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// `n` loads with every bus's p and q drawn independently and uniformly
/// within `pct` percent of nominal.
pub fn generate_loads(net: &Network, n: usize, pct: f64, seed: u64) -> Vec<LoadProfile> {
    let nominal = nominal_load(net);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spread = pct / 100.0;
    let mut draw = |x: f64| {
        if spread == 0.0 {
            x
        } else {
            x * (1.0 + rng.random_range(-spread..=spread))
        }
    };
    (0..n)
        .map(|_| {
            let mut load = nominal.clone();
            for i in 0..load.len() {
                load.p[i] = draw(load.p[i]);
                load.q[i] = draw(load.q[i]);
            }
            load
        })
        .collect()
}

/// Samples in load order plus the number of loads skipped because no start
/// converged.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildOutcome {
    pub samples: Vec<Sample>,
    pub failed_loads: usize,
}

/// Multi-start solve of every load; each distinct solution becomes a sample,
/// the cheapest labeled global.
pub fn build_samples(net: &Network, loads: &[LoadProfile], k_starts: usize, cfg: &SolverConfig) -> BuildOutcome {
    let per_load: Vec<Option<Vec<Sample>>> = loads
        .par_iter()
        .map(|load| {
            let clusters = multi_start(net, load, k_starts, cfg).ok()?;
            if clusters.is_empty() {
                return None;
            }
            Some(
                clusters
                    .into_iter()
                    .enumerate()
                    .map(|(rank, c)| Sample {
                        load: load.clone(),
                        point: c.result.point,
                        gen: c.result.gen,
                        duals: c.result.duals,
                        cost: c.result.cost,
                        label: if rank == 0 { Label::Global } else { Label::Local },
                        cluster_rank: rank,
                    })
                    .collect(),
            )
        })
        .collect();
    let failed_loads = per_load.iter().filter(|s| s.is_none()).count();
    BuildOutcome {
        samples: per_load.into_iter().flatten().flatten().collect(),
        failed_loads,
    }
}

/// Runs of consecutive samples sharing a load, as index ranges.
fn load_groups(samples: &[Sample]) -> Vec<std::ops::Range<usize>> {
    let mut groups = Vec::new();
    let mut start = 0;
    for i in 1..=samples.len() {
        if i == samples.len() || samples[i].load != samples[start].load {
            if i > start {
                groups.push(start..i);
            }
            start = i;
        }
    }
    groups
}

/// Keeps one sample per load, exactly `round(local_fraction * loads)` of
/// them strictly local. When too few loads have the needed kind the
/// nearest achievable count is used if it lands within two percentage
/// points of the target.
pub fn mix(data: &Dataset, local_fraction: f64, seed: u64) -> Result<Dataset, DatasetError> {
    if !(0.0..=1.0).contains(&local_fraction) {
        return Err(DatasetError::Spec("local_fraction must lie in [0, 1]".into()));
    }
    let groups = load_groups(&data.samples);
    let n = groups.len();
    let has = |g: &std::ops::Range<usize>, l: Label| data.samples[g.clone()].iter().any(|s| s.label == l);
    let with_local: Vec<usize> = (0..n).filter(|&i| has(&groups[i], Label::Local)).collect();
    let with_global = (0..n).filter(|&i| has(&groups[i], Label::Global)).count();
    let target = (local_fraction * n as f64).round() as usize;
    let hi = with_local.len();
    let lo = n.saturating_sub(with_global);
    let count = target.clamp(lo, hi);
    if n > 0 && (count as f64 / n as f64 - local_fraction).abs() > 0.02 {
        let (kind, available) = if target > hi {
            (Label::Local, with_local.len())
        } else {
            (Label::Global, with_global)
        };
        return Err(DatasetError::Insufficient {
            target: local_fraction,
            kind,
            available,
            loads: n,
        });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Loads without a global sample are local no matter what; the remaining
    // local slots go to randomly chosen loads that have one.
    let mut chosen_local = with_local.clone();
    chosen_local.shuffle(&mut rng);
    let must_local: Vec<usize> = with_local
        .iter()
        .copied()
        .filter(|&i| !has(&groups[i], Label::Global))
        .collect();
    let mut local_set = vec![false; n];
    for &i in &must_local {
        local_set[i] = true;
    }
    let mut picked = must_local.len();
    for &i in &chosen_local {
        if picked >= count {
            break;
        }
        if !local_set[i] {
            local_set[i] = true;
            picked += 1;
        }
    }

    let mut samples = Vec::with_capacity(n);
    for (gi, g) in groups.iter().enumerate() {
        let want = if local_set[gi] { Label::Local } else { Label::Global };
        let options: Vec<&Sample> = data.samples[g.clone()].iter().filter(|s| s.label == want).collect();
        let pick = options[rng.random_range(0..options.len())];
        samples.push(pick.clone());
    }
    Ok(Dataset {
        n_bus: data.n_bus,
        fingerprint: data.fingerprint.clone(),
        samples,
    })
}

/// Shuffled split with `floor(train_fraction * n)` training samples.
pub fn split(data: &Dataset, train_fraction: f64, seed: u64) -> (Dataset, Dataset) {
    let n = data.samples.len();
    let n_train = ((train_fraction * n as f64) + 1e-9).floor().min(n as f64) as usize;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let part = |idx: &[usize]| Dataset {
        n_bus: data.n_bus,
        fingerprint: data.fingerprint.clone(),
        samples: idx.iter().map(|&i| data.samples[i].clone()).collect(),
    };
    (part(&order[..n_train]), part(&order[n_train..]))
}

pub fn header(n: usize) -> Vec<String> {
    let mut cols = Vec::with_capacity(8 * n + 3);
    for block in ["p_load", "q_load", "v", "theta", "pg", "qg", "mu_p", "mu_q"] {
        cols.extend((0..n).map(|i| format!("{block}_{i}")));
    }
    cols.extend(["cost", "label", "cluster_rank"].map(String::from));
    cols
}

impl Dataset {
    pub fn new(net: &Network, samples: Vec<Sample>) -> Self {
        Self {
            n_bus: net.n_bus(),
            fingerprint: net.fingerprint(),
            samples,
        }
    }

    /// Fails unless the dataset was built for `net`.
    pub fn check_network(&self, net: &Network) -> Result<(), DatasetError> {
        let expected = net.fingerprint();
        if self.fingerprint != expected || self.n_bus != net.n_bus() {
            return Err(DatasetError::Fingerprint {
                expected,
                found: self.fingerprint.clone(),
            });
        }
        Ok(())
    }

    pub fn fraction_local(&self) -> f64 {
        if self.samples.is_empty() {
            return 0.0;
        }
        let local = self.samples.iter().filter(|s| s.label == Label::Local).count();
        local as f64 / self.samples.len() as f64
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), DatasetError> {
        writeln!(out, "{MAGIC} buses={} fingerprint={}", self.n_bus, self.fingerprint)?;
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| DatasetError::Io(e.into());
        w.write_record(header(self.n_bus)).map_err(io)?;
        for s in &self.samples {
            let mut row: Vec<String> = Vec::with_capacity(8 * self.n_bus + 3);
            for block in [
                &s.load.p,
                &s.load.q,
                &s.point.v,
                &s.point.theta,
                &s.gen.p,
                &s.gen.q,
                &s.duals.mu_p,
                &s.duals.mu_q,
            ] {
                row.extend(block.iter().map(|v| v.to_string()));
            }
            row.push(s.cost.to_string());
            row.push(s.label.to_string());
            row.push(s.cluster_rank.to_string());
            w.write_record(&row).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_from<R: Read>(mut input: R) -> Result<Self, DatasetError> {
        let mut text = String::new();
        input.read_to_string(&mut text)?;
        let (first, rest) = text.split_once('\n').unwrap_or((text.as_str(), ""));
        let bad = |line: usize, message: String| DatasetError::Parse { line, message };
        let meta = first
            .strip_prefix(MAGIC)
            .ok_or_else(|| bad(1, "missing dataset marker line".into()))?;
        let mut n_bus = None;
        let mut fingerprint = None;
        for field in meta.split_whitespace() {
            match field.split_once('=') {
                Some(("buses", v)) => n_bus = v.parse::<usize>().ok(),
                Some(("fingerprint", v)) => fingerprint = Some(v.to_string()),
                _ => return Err(bad(1, format!("unknown field {field:?}"))),
            }
        }
        let (Some(n), Some(fingerprint)) = (n_bus, fingerprint) else {
            return Err(bad(1, "marker line needs buses and fingerprint".into()));
        };
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(rest.as_bytes());
        let expected = header(n);
        let found = reader.headers().map_err(|e| bad(2, e.to_string()))?;
        if found.iter().ne(expected.iter().map(String::as_str)) {
            return Err(bad(2, "header does not match the bus count".into()));
        }
        let mut samples = Vec::new();
        for (k, rec) in reader.records().enumerate() {
            let line = k + 3;
            let rec = rec.map_err(|e| bad(line, e.to_string()))?;
            if rec.len() != expected.len() {
                return Err(bad(
                    line,
                    format!("expected {} columns, found {}", expected.len(), rec.len()),
                ));
            }
            let num = |j: usize| -> Result<f64, DatasetError> {
                rec[j]
                    .parse::<f64>()
                    .map_err(|_| bad(line, format!("column {} is not a number: {:?}", expected[j], &rec[j])))
            };
            let block = |b: usize| -> Result<Vec<f64>, DatasetError> { (b * n..(b + 1) * n).map(num).collect() };
            let label = match &rec[8 * n + 1] {
                "global" => Label::Global,
                "local" => Label::Local,
                other => return Err(bad(line, format!("unknown label {other:?}"))),
            };
            let cluster_rank = rec[8 * n + 2]
                .parse()
                .map_err(|_| bad(line, "cluster_rank is not an integer".into()))?;
            samples.push(Sample {
                load: LoadProfile {
                    p: block(0)?,
                    q: block(1)?,
                },
                point: OperatingPoint {
                    v: block(2)?,
                    theta: block(3)?,
                },
                gen: GenDispatch {
                    p: block(4)?,
                    q: block(5)?,
                },
                duals: DualVector {
                    mu_p: block(6)?,
                    mu_q: block(7)?,
                },
                cost: num(8 * n)?,
                label,
                cluster_rank,
            });
        }
        Ok(Self {
            n_bus: n,
            fingerprint,
            samples,
        })
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        Self::read_from(std::fs::File::open(path)?)
    }
}
