use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use crate::dataset::{mix, split, Dataset};
use crate::mlp::TrainConfig;
use crate::network::{LoadProfile, Network};
use crate::solver::{multi_start, random_start, solve_acopf, SolveResult, SolverConfig, StartKind};

use super::{
    baseline_predict, baseline_train, solve_with_warm_start, train_pipeline, BaselineModel, PipelineError, TargetCache,
    TrainedPipeline,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub solver: SolverConfig,
    /// Starts used for the reference solution of each instance.
    pub k_starts: usize,
    /// Seeds the random-start comparison run.
    pub seed: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            solver: SolverConfig::default(),
            k_starts: 10,
            seed: 0,
        }
    }
}

/// Offset of the random-start stream, keeping it apart from the streams
/// the multi-start reference uses.
const RANDOM_STREAM: u64 = 1 << 32;

/// One test load. Ratios are taken against `reference_cost`, the cheapest
/// converged cost among the multi-start reference, the learned warm start and the
/// random start; they are `NaN` for solves that did not converge.
#[derive(Debug, Clone, PartialEq)]
pub struct InstanceRecord {
    pub index: usize,
    pub reference_cost: f64,
    pub clusters: usize,
    pub alg1_cost: f64,
    pub alg1_converged: bool,
    pub alg1_iterations: usize,
    pub alg1_ratio: f64,
    pub random_cost: f64,
    pub random_converged: bool,
    pub random_iterations: usize,
    pub random_ratio: f64,
    pub baseline_cost: f64,
    pub baseline_ratio: f64,
    pub baseline_recovered_cost: Option<f64>,
    pub alg1_time: f64,
    pub random_time: f64,
    pub baseline_time: f64,
    pub reference_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub instances: usize,
    pub alg1_mean_ratio: f64,
    pub alg1_max_ratio: f64,
    pub alg1_failures: usize,
    pub alg1_mean_iterations: f64,
    pub random_mean_ratio: f64,
    pub random_failures: usize,
    pub random_mean_iterations: f64,
    pub baseline_mean_ratio: f64,
    pub baseline_pf_failures: usize,
    pub alg1_mean_time: f64,
    pub random_mean_time: f64,
    /// `random_mean_time / alg1_mean_time - 1`.
    pub speedup: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub records: Vec<InstanceRecord>,
    pub summary: EvalSummary,
}

fn mean(values: impl Iterator<Item = f64>) -> f64 {
    let (s, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    if n == 0 {
        f64::NAN
    } else {
        s / n as f64
    }
}

fn ratio(r: &SolveResult, reference: f64) -> f64 {
    if r.converged() {
        r.cost / reference
    } else {
        f64::NAN
    }
}

fn evaluate_one(
    net: &Network,
    index: usize,
    load: &LoadProfile,
    pipeline: &TrainedPipeline,
    baseline: &BaselineModel,
    cfg: &EvalConfig,
) -> Result<InstanceRecord, PipelineError> {
    let solver = SolverConfig {
        seed: cfg.seed,
        ..cfg.solver.clone()
    };
    let t0 = Instant::now();
    let clusters = multi_start(net, load, cfg.k_starts, &solver)?;
    let reference_time = t0.elapsed().as_secs_f64();
    let alg1 = solve_with_warm_start(net, load, pipeline, &solver)?;

    let t0 = Instant::now();
    let init = random_start(net, &solver, RANDOM_STREAM + index as u64);
    let mut random = solve_acopf(net, load, &init, &solver)?;
    random.start = StartKind::Random;
    random.wall_time = t0.elapsed().as_secs_f64();

    let base = baseline_predict(baseline, net, load, &solver)?;

    let reference_cost = clusters
        .first()
        .map(|c| c.result.cost)
        .into_iter()
        .chain([&alg1, &random].into_iter().filter(|r| r.converged()).map(|r| r.cost))
        .fold(f64::NAN, f64::min);
    Ok(InstanceRecord {
        index,
        reference_cost,
        clusters: clusters.len(),
        alg1_cost: alg1.cost,
        alg1_converged: alg1.converged(),
        alg1_iterations: alg1.iterations,
        alg1_ratio: ratio(&alg1, reference_cost),
        random_cost: random.cost,
        random_converged: random.converged(),
        random_iterations: random.iterations,
        random_ratio: ratio(&random, reference_cost),
        baseline_cost: base.predicted_cost,
        baseline_ratio: base.predicted_cost / reference_cost,
        baseline_recovered_cost: base.recovered_cost,
        alg1_time: alg1.wall_time,
        random_time: random.wall_time,
        baseline_time: base.wall_time,
        reference_time,
    })
}

/// Runs every method on every load. Instances run concurrently; records
/// come back in load order.
pub fn evaluate(
    net: &Network,
    loads: &[LoadProfile],
    pipeline: &TrainedPipeline,
    baseline: &BaselineModel,
    cfg: &EvalConfig,
) -> Result<EvalReport, PipelineError> {
    let records = loads
        .par_iter()
        .enumerate()
        .map(|(i, load)| evaluate_one(net, i, load, pipeline, baseline, cfg))
        .collect::<Result<Vec<_>, _>>()?;
    let finite = |v: f64| v.is_finite().then_some(v);
    let alg1_mean_time = mean(records.iter().map(|r| r.alg1_time));
    let random_mean_time = mean(records.iter().map(|r| r.random_time));
    let summary = EvalSummary {
        instances: records.len(),
        alg1_mean_ratio: mean(records.iter().filter_map(|r| finite(r.alg1_ratio))),
        alg1_max_ratio: records
            .iter()
            .filter_map(|r| finite(r.alg1_ratio))
            .fold(f64::NAN, f64::max),
        alg1_failures: records.iter().filter(|r| !r.alg1_converged).count(),
        alg1_mean_iterations: mean(records.iter().map(|r| r.alg1_iterations as f64)),
        random_mean_ratio: mean(records.iter().filter_map(|r| finite(r.random_ratio))),
        random_failures: records.iter().filter(|r| !r.random_converged).count(),
        random_mean_iterations: mean(records.iter().map(|r| r.random_iterations as f64)),
        baseline_mean_ratio: mean(records.iter().filter_map(|r| finite(r.baseline_ratio))),
        baseline_pf_failures: records.iter().filter(|r| r.baseline_recovered_cost.is_none()).count(),
        alg1_mean_time,
        random_mean_time,
        speedup: random_mean_time / alg1_mean_time - 1.0,
    };
    Ok(EvalReport { records, summary })
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

impl EvalReport {
    /// Per-instance costs, ratios and iteration counts. Contains no timing,
    /// so it is byte-identical across runs with the same seeds.
    pub fn report_csv(&self) -> String {
        let mut out = String::from(
            "index,reference_cost,clusters,alg1_cost,alg1_converged,alg1_iterations,alg1_ratio,\
             random_cost,random_converged,random_iterations,random_ratio,\
             baseline_cost,baseline_ratio,baseline_recovered_cost\n",
        );
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                r.index,
                r.reference_cost,
                r.clusters,
                r.alg1_cost,
                r.alg1_converged,
                r.alg1_iterations,
                r.alg1_ratio,
                r.random_cost,
                r.random_converged,
                r.random_iterations,
                r.random_ratio,
                r.baseline_cost,
                r.baseline_ratio,
                opt(r.baseline_recovered_cost)
            )
            .unwrap();
        }
        out
    }

    /// Wall times in seconds, per instance, then the means on a last row.
    pub fn timing_csv(&self) -> String {
        let mut out = String::from("index,reference_time,alg1_time,random_time,baseline_time\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{},{}",
                r.index, r.reference_time, r.alg1_time, r.random_time, r.baseline_time
            )
            .unwrap();
        }
        let s = &self.summary;
        writeln!(
            out,
            "mean,{},{},{},{}",
            mean(self.records.iter().map(|r| r.reference_time)),
            s.alg1_mean_time,
            s.random_mean_time,
            mean(self.records.iter().map(|r| r.baseline_time))
        )
        .unwrap();
        writeln!(out, "# speedup of learned over random start: {}", s.speedup).unwrap();
        out
    }

    /// Aggregates as `metric,value` rows; timing lives in the timing file.
    pub fn summary_csv(&self) -> String {
        let s = &self.summary;
        let rows: [(&str, String); 10] = [
            ("instances", s.instances.to_string()),
            ("alg1_mean_ratio", s.alg1_mean_ratio.to_string()),
            ("alg1_max_ratio", s.alg1_max_ratio.to_string()),
            ("alg1_failures", s.alg1_failures.to_string()),
            ("alg1_mean_iterations", s.alg1_mean_iterations.to_string()),
            ("random_mean_ratio", s.random_mean_ratio.to_string()),
            ("random_failures", s.random_failures.to_string()),
            ("random_mean_iterations", s.random_mean_iterations.to_string()),
            ("baseline_mean_ratio", s.baseline_mean_ratio.to_string()),
            ("baseline_pf_failures", s.baseline_pf_failures.to_string()),
        ];
        let mut out = String::from("metric,value\n");
        for (k, v) in rows {
            writeln!(out, "{k},{v}").unwrap();
        }
        out
    }

    /// `x` is the instance index; one ratio column per method.
    pub fn plot_csv(&self) -> String {
        let mut out = String::from("x,alg1_ratio,baseline_ratio,random_ratio\n");
        for r in &self.records {
            writeln!(
                out,
                "{},{},{},{}",
                r.index, r.alg1_ratio, r.baseline_ratio, r.random_ratio
            )
            .unwrap();
        }
        out
    }

    /// Writes `report.csv`, `summary.csv`, `plot.csv` and `timing.csv`.
    pub fn write_dir(&self, dir: &Path) -> Result<(), PipelineError> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.csv"), self.report_csv())?;
        std::fs::write(dir.join("summary.csv"), self.summary_csv())?;
        std::fs::write(dir.join("plot.csv"), self.plot_csv())?;
        std::fs::write(dir.join("timing.csv"), self.timing_csv())?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub fractions: Vec<f64>,
    pub train_fraction: f64,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Seeds mixing and splitting.
    pub seed: u64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fractions: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            train_fraction: 0.9,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepPoint {
    pub fraction: f64,
    /// Local share of the mixed training split.
    pub realized_fraction: f64,
    pub report: EvalReport,
}

/// For each local fraction: mix one sample per load out of `pool`, split,
/// train both pipelines and evaluate on the held-out loads.
pub fn sweep_local_fraction(
    net: &Network,
    pool: &Dataset,
    cfg: &SweepConfig,
) -> Result<Vec<SweepPoint>, PipelineError> {
    pool.check_network(net)?;
    let mut cache = TargetCache::default();
    let mut points = Vec::with_capacity(cfg.fractions.len());
    for &f in &cfg.fractions {
        let mixed = mix(pool, f, cfg.seed)?;
        let (train, test) = split(&mixed, cfg.train_fraction, cfg.seed);
        let (pipeline, _) = train_pipeline(net, &train, Some(&test), &cfg.eval.solver, &cfg.train, &mut cache)?;
        let (baseline, _) = baseline_train(net, &train, Some(&test), &cfg.train)?;
        let loads: Vec<LoadProfile> = test.samples.iter().map(|s| s.load.clone()).collect();
        let report = evaluate(net, &loads, &pipeline, &baseline, &cfg.eval)?;
        points.push(SweepPoint {
            fraction: f,
            realized_fraction: train.fraction_local(),
            report,
        });
    }
    Ok(points)
}

/// `x` is the local fraction; mean ratio per method.
pub fn sweep_plot_csv(points: &[SweepPoint]) -> String {
    let mut out = String::from("x,realized_fraction,alg1_mean_ratio,baseline_mean_ratio,random_mean_ratio\n");
    for p in points {
        let s = &p.report.summary;
        writeln!(
            out,
            "{},{},{},{},{}",
            p.fraction, p.realized_fraction, s.alg1_mean_ratio, s.baseline_mean_ratio, s.random_mean_ratio
        )
        .unwrap();
    }
    out
}
