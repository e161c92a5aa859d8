//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.
//!
//! Optional archive cases are read from `LAGOPF_CASE22`, `LAGOPF_CASE39` and
//! `LAGOPF_CASE118` (MATPOWER files); their checks are skipped when unset.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use lagopf::dataset::{build_samples, generate_loads, mix, split, Dataset};
use lagopf::matpower::{parse_matpower_case, write_matpower_case};
use lagopf::mlp::{self, Activation, MlpParams, OutputActivation, TrainConfig};
use lagopf::network::{nominal_load, CostPolynomial, Network};
use lagopf::opf::{partial_lagrangian, penalized_objective, DualVector, GenDispatch, OperatingPoint};
use lagopf::pipeline::{
    baseline_train, evaluate, sweep_local_fraction, train_pipeline, EvalConfig, ModelBundle, SweepConfig, TargetCache,
};
use lagopf::solver::{multi_start, solve_acopf, SolveRecord, SolverConfig};
use lagopf::synthetic::{random_network, random_point};
use lagopf::twobus::{find_solutions, minimizer_map, TwoBusParams};

type Outcome = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn within_time(t0: Instant, limit_s: u64, detail: String) -> Outcome {
    let took = t0.elapsed();
    ensure!(
        took <= Duration::from_secs(limit_s),
        "{detail}; took {:.1} s, limit {limit_s} s",
        took.as_secs_f64()
    );
    Ok(format!("{detail}; {:.1} s", took.as_secs_f64()))
}

/// Largest absolute difference over the largest magnitude, floored at one.
fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let scale = a.iter().chain(b).fold(1.0f64, |m, x| m.max(x.abs()));
    diff / scale
}

const H: f64 = 1e-6;

/// Central differences over magnitudes and non-slack angles.
fn fd_point(x: &OperatingPoint, slack: usize, f: impl Fn(&OperatingPoint) -> f64) -> (Vec<f64>, Vec<f64>) {
    let n = x.n_bus();
    let mut gv = vec![0.0; n];
    let mut gt = vec![0.0; n];
    for i in 0..n {
        let (mut a, mut b) = (x.clone(), x.clone());
        a.v[i] += H;
        b.v[i] -= H;
        gv[i] = (f(&a) - f(&b)) / (2.0 * H);
        if i != slack {
            let (mut a, mut b) = (x.clone(), x.clone());
            a.theta[i] += H;
            b.theta[i] -= H;
            gt[i] = (f(&a) - f(&b)) / (2.0 * H);
        }
    }
    (gv, gt)
}

fn criterion_1() -> Outcome {
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst_pen = 0.0f64;
    for _ in 0..100 {
        let net = random_network(rng.random_range(2..=10), &mut rng);
        let x = random_point(&net, &mut rng);
        let load = nominal_load(&net);
        let rho = rng.random_range(1.0..100.0);
        let (_, g) = penalized_objective(&net, &x, &load, rho);
        let (fv, ft) = fd_point(&x, net.slack(), |p| penalized_objective(&net, p, &load, rho).0);
        worst_pen = worst_pen.max(rel_err(&g.v, &fv)).max(rel_err(&g.theta, &ft));
    }
    ensure!(worst_pen < 1e-6, "penalized objective relative error {worst_pen:e}");

    let mut worst_lag = 0.0f64;
    for _ in 0..100 {
        let net = random_network(rng.random_range(2..=10), &mut rng);
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
        let f = |p: &OperatingPoint, d: &GenDispatch| partial_lagrangian(&net, p, d, &load, &mu).0;
        let (_, g) = partial_lagrangian(&net, &x, &gen, &load, &mu);
        let (fv, ft) = fd_point(&x, net.slack(), |p| f(p, &gen));
        let mut fp = vec![0.0; n];
        let mut fq = vec![0.0; n];
        for i in net.generator_buses() {
            let (mut a, mut b) = (gen.clone(), gen.clone());
            a.p[i] += H;
            b.p[i] -= H;
            fp[i] = (f(&x, &a) - f(&x, &b)) / (2.0 * H);
            let (mut a, mut b) = (gen.clone(), gen.clone());
            a.q[i] += H;
            b.q[i] -= H;
            fq[i] = (f(&x, &a) - f(&x, &b)) / (2.0 * H);
        }
        for (a, b) in [(&g.v, &fv), (&g.theta, &ft), (&g.p, &fp), (&g.q, &fq)] {
            worst_lag = worst_lag.max(rel_err(a, b));
        }
    }
    ensure!(worst_lag < 1e-6, "partial Lagrangian relative error {worst_lag:e}");

    let mut worst_mlp = 0.0f64;
    for k in 0..100 {
        let act = if k % 2 == 0 {
            Activation::Relu
        } else {
            Activation::Sigmoid
        };
        let out = if k % 4 < 2 {
            OutputActivation::Linear
        } else {
            OutputActivation::Sigmoid
        };
        let (n_in, hidden, n_out) = (rng.random_range(1..5), rng.random_range(2..8), rng.random_range(1..4));
        let mut p = MlpParams::init(&[n_in, hidden, hidden, n_out], act, out, &mut rng).map_err(err)?;
        let w: Vec<f64> = (0..p.num_params()).map(|_| rng.random_range(-1.0..1.0)).collect();
        p.set_flat(&w).map_err(err)?;
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n_in).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..n_out).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let analytic = p.loss_and_gradient(&xs, &ys).map_err(err)?.1.to_flat();
        for j in 0..w.len() {
            let mut shifted = w.clone();
            shifted[j] += H;
            p.set_flat(&shifted).map_err(err)?;
            let up = p.loss_and_gradient(&xs, &ys).map_err(err)?.0;
            shifted[j] -= 2.0 * H;
            p.set_flat(&shifted).map_err(err)?;
            let down = p.loss_and_gradient(&xs, &ys).map_err(err)?.0;
            let fd = (up - down) / (2.0 * H);
            let scale = fd.abs().max(analytic[j].abs()).max(1e-3);
            worst_mlp = worst_mlp.max((fd - analytic[j]).abs() / scale);
        }
    }
    ensure!(worst_mlp < 1e-5, "MLP backprop relative error {worst_mlp:e}");
    within_time(
        t0,
        30,
        format!("max rel err penalized {worst_pen:.1e}, lagrangian {worst_lag:.1e}, mlp {worst_mlp:.1e}"),
    )
}

fn criterion_2() -> Outcome {
    let t0 = Instant::now();
    let p = TwoBusParams::canonical();
    let s = find_solutions(&p).map_err(err)?;
    let net = p.to_network();
    let clusters = multi_start(&net, &nominal_load(&net), 50, &SolverConfig::default()).map_err(err)?;
    ensure!(clusters.len() == 2, "expected 2 clusters, found {}", clusters.len());
    let pairs = [
        (&clusters[0].result, s.cost_global, s.theta_global),
        (&clusters[1].result, s.cost_local, s.theta_local),
    ];
    for (r, cost, theta) in pairs {
        let rel = (r.cost - cost).abs() / cost;
        ensure!(rel < 1e-6, "cluster cost {} vs oracle {cost} (rel {rel:e})", r.cost);
        let angle = -r.point.theta[1];
        ensure!((angle - theta).abs() < 1e-5, "cluster angle {angle} vs oracle {theta}");
    }
    within_time(
        t0,
        10,
        format!(
            "clusters at costs {:.6} and {:.6} with {} + {} members",
            clusters[0].result.cost, clusters[1].result.cost, clusters[0].members, clusters[1].members
        ),
    )
}

fn criterion_3() -> Outcome {
    let t0 = Instant::now();
    let p = TwoBusParams::canonical();
    let s = find_solutions(&p).map_err(err)?;
    let net = p.to_network();
    let load = nominal_load(&net);
    let cfg = SolverConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut hits = 0;
    for _ in 0..100 {
        let mu = rng.random_range(s.mu_global..=s.mu_local);
        let theta = minimizer_map(&p, mu).map_err(err)?;
        let x = OperatingPoint {
            v: vec![1.0, 1.0],
            theta: vec![0.0, -theta],
        };
        let r = solve_acopf(&net, &load, &x, &cfg).map_err(err)?;
        if r.converged() && (r.cost - s.cost_global).abs() < 1e-6 * s.cost_global {
            hits += 1;
        }
    }
    ensure!(hits == 100, "{hits}/100 warm starts reached the global solution");
    within_time(t0, 60, format!("{hits}/100 reached the global solution"))
}

fn build_pool(net: &Network, loads: usize, seed: u64) -> Result<Dataset, String> {
    let loads = generate_loads(net, loads, 1.0, seed);
    let cfg = SolverConfig {
        seed,
        ..SolverConfig::default()
    };
    let built = build_samples(net, &loads, 10, &cfg);
    ensure!(built.failed_loads == 0, "{} loads failed to solve", built.failed_loads);
    Ok(Dataset::new(net, built.samples))
}

fn read_case(path: &Path) -> Result<Network, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    parse_matpower_case(&text).map_err(err)
}

/// Worst-to-best cost ratio among the multi-start clusters at nominal load.
fn archive_gap(net: &Network) -> Result<f64, String> {
    let clusters = multi_start(net, &nominal_load(net), 50, &SolverConfig::default()).map_err(err)?;
    ensure!(!clusters.is_empty(), "no converged start");
    Ok(clusters.last().unwrap().result.cost / clusters[0].result.cost)
}

fn archive_checks() -> Result<Vec<String>, String> {
    let mut notes = Vec::new();
    for (var, gap) in [("LAGOPF_CASE22", 1.30), ("LAGOPF_CASE118", 1.39)] {
        let Ok(path) = std::env::var(var) else {
            notes.push(format!("{var} unset, skipped"));
            continue;
        };
        let net = read_case(Path::new(&path))?;
        let found = archive_gap(&net)?;
        ensure!(
            (found - gap).abs() <= 0.05,
            "{var}: multi-start gap {found:.3}, expected {gap} +- 0.05"
        );
        let pool = build_pool(&net, 200, 4)?;
        let cfg = SweepConfig {
            train: TrainConfig {
                hidden_width: TrainConfig::default_width(net.n_bus()),
                ..TrainConfig::default()
            },
            seed: 4,
            ..SweepConfig::default()
        };
        let points = sweep_local_fraction(&net, &pool, &cfg).map_err(err)?;
        for pt in &points {
            let r = pt.report.summary.alg1_mean_ratio;
            ensure!(r <= 1.01, "{var}: learned-start ratio {r} at fraction {}", pt.fraction);
        }
        notes.push(format!("{var} gap {found:.3}"));
    }
    Ok(notes)
}

fn criterion_4(pool: &Dataset, net: &Network) -> Outcome {
    let t0 = Instant::now();
    let s = find_solutions(&TwoBusParams::canonical()).map_err(err)?;
    let cfg = SweepConfig {
        train: TrainConfig {
            hidden_width: TrainConfig::default_width(net.n_bus()),
            ..TrainConfig::default()
        },
        seed: 5,
        ..SweepConfig::default()
    };
    let points = sweep_local_fraction(net, pool, &cfg).map_err(err)?;
    let alg1: Vec<f64> = points.iter().map(|p| p.report.summary.alg1_mean_ratio).collect();
    let base: Vec<f64> = points.iter().map(|p| p.report.summary.baseline_mean_ratio).collect();
    let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.4}")).collect::<Vec<_>>().join(" ");
    for (p, r) in points.iter().zip(&alg1) {
        ensure!(*r <= 1.005, "learned-start ratio {r} at fraction {}", p.fraction);
        ensure!(
            p.report.summary.alg1_failures == 0,
            "learned start failed at fraction {}",
            p.fraction
        );
    }
    ensure!(
        base.windows(2).all(|w| w[0] <= w[1]),
        "baseline ratios not nondecreasing: {}",
        fmt(&base)
    );
    let last = *base.last().unwrap();
    ensure!(last > 1.05, "baseline ratio {last} at fraction 1");
    let spread = alg1.iter().cloned().fold(f64::MIN, f64::max) - alg1.iter().cloned().fold(f64::MAX, f64::min);
    let archive = archive_checks()?;
    within_time(
        t0,
        900,
        format!(
            "alg1 {} | baseline {} | fixture gap {:.3} | alg1 spread {:.2e} | {}",
            fmt(&alg1),
            fmt(&base),
            s.cost_local / s.cost_global,
            spread,
            archive.join(", ")
        ),
    )
}

fn criterion_5(pool: &Dataset, fixture: &Network) -> Outcome {
    let supplied = ["LAGOPF_CASE39", "LAGOPF_CASE118"]
        .iter()
        .find_map(|v| std::env::var(v).ok().map(|p| (v.to_string(), p)));
    let (label, net, pool) = match supplied {
        Some((var, path)) => {
            let net = read_case(Path::new(&path))?;
            let pool = build_pool(&net, 500, 6)?;
            (var, net, pool)
        }
        None => ("two-bus fixture".to_string(), fixture.clone(), pool.clone()),
    };
    let (train, test) = split(&mix(&pool, 0.0, 6).map_err(err)?, 0.9, 6);
    let tcfg = TrainConfig {
        hidden_width: TrainConfig::default_width(net.n_bus()),
        seed: 6,
        ..TrainConfig::default()
    };
    let solver = SolverConfig::default();
    let (pipeline, _) =
        train_pipeline(&net, &train, Some(&test), &solver, &tcfg, &mut TargetCache::default()).map_err(err)?;
    let (baseline, _) = baseline_train(&net, &train, Some(&test), &tcfg).map_err(err)?;
    let loads = generate_loads(&net, 200, 1.0, 606);
    let cfg = EvalConfig {
        k_starts: 1,
        seed: 6,
        ..EvalConfig::default()
    };
    let report = evaluate(&net, &loads, &pipeline, &baseline, &cfg).map_err(err)?;
    let s = &report.summary;
    ensure!(
        s.alg1_mean_iterations <= s.random_mean_iterations,
        "{label}: learned start {} mean iterations vs random {}",
        s.alg1_mean_iterations,
        s.random_mean_iterations
    );
    Ok(format!(
        "{label}: mean iterations learned start {:.2} vs random {:.2}; wall-time speedup {:+.1}%",
        s.alg1_mean_iterations,
        s.random_mean_iterations,
        100.0 * s.speedup
    ))
}

fn run(dir: &Path, args: &[&str]) -> Result<std::process::Output, String> {
    Command::new(env!("CARGO_BIN_EXE_lagopf"))
        .args(args)
        .current_dir(dir)
        .output()
        .map_err(err)
}

fn run_ok(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = run(dir, args)?;
    ensure!(
        out.status.success(),
        "`lagopf {}` failed: {}",
        args.join(" "),
        String::from_utf8_lossy(&out.stderr).trim()
    );
    Ok(())
}

fn run_refused(dir: &Path, args: &[&str], class: &str) -> Result<(), String> {
    let out = run(dir, args)?;
    let stderr = String::from_utf8_lossy(&out.stderr);
    ensure!(!out.status.success(), "`lagopf {}` should have failed", args.join(" "));
    ensure!(
        stderr.starts_with(&format!("error[{class}]: ")) && stderr.trim_end().lines().count() == 1,
        "`lagopf {}` reported {stderr:?}, expected one error[{class}] line",
        args.join(" ")
    );
    Ok(())
}

const ARTIFACTS: [&str; 13] = [
    "case/twobus.m",
    "case/landscape.csv",
    "case/minimizer_map.csv",
    "case/constants.json",
    "data/pool.csv",
    "data/train.csv",
    "data/test.csv",
    "data/generate.json",
    "model/model.json",
    "model/loss.csv",
    "model/fit.csv",
    "eval/report.csv",
    "eval/summary.csv",
];

fn pipeline_run(root: &Path) -> Result<(), String> {
    run_ok(root, &["twobus", "--out", "case"])?;
    run_ok(
        root,
        &[
            "generate",
            "--case",
            "case/twobus.m",
            "--out",
            "data",
            "--seed",
            "8",
            "--samples",
            "120",
            "--local-fraction",
            "1",
            "--k-starts",
            "8",
        ],
    )?;
    run_ok(
        root,
        &[
            "train",
            "--case",
            "case/twobus.m",
            "--data",
            "data",
            "--out",
            "model",
            "--seed",
            "8",
            "--epochs",
            "120",
        ],
    )?;
    run_ok(
        root,
        &[
            "eval",
            "--case",
            "case/twobus.m",
            "--model",
            "model/model.json",
            "--data",
            "data",
            "--out",
            "eval",
            "--seed",
            "8",
        ],
    )
}

fn summary_value(path: &Path, key: &str) -> Result<f64, String> {
    let text = std::fs::read_to_string(path).map_err(err)?;
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key},")))
        .ok_or(format!("{key} missing from {}", path.display()))?
        .parse()
        .map_err(err)
}

fn criterion_6() -> Outcome {
    let t0 = Instant::now();
    let a = tempfile::tempdir().map_err(err)?;
    let b = tempfile::tempdir().map_err(err)?;
    pipeline_run(a.path())?;
    pipeline_run(b.path())?;
    let mut bytes = 0;
    for name in ARTIFACTS.iter().chain(&["eval/plot.csv"]) {
        let x = std::fs::read(a.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure!(x == y, "{name} differs between runs");
        bytes += x.len();
    }
    let ratio = summary_value(&a.path().join("eval/summary.csv"), "alg1_mean_ratio")?;
    ensure!(
        ratio <= 1.005,
        "learned-start ratio {ratio} after training on local solutions only"
    );

    // Round trips of every persisted format.
    let root = a.path();
    let p = TwoBusParams::canonical();
    let net = read_case(&root.join("case/twobus.m"))?;
    ensure!(
        net.fingerprint() == p.to_network().fingerprint(),
        "case file changed the fingerprint"
    );
    let rewritten = write_matpower_case(&net, "twobus");
    ensure!(
        rewritten.as_bytes() == std::fs::read(root.join("case/twobus.m")).map_err(err)?,
        "case file does not round-trip"
    );
    for name in ["data/pool.csv", "data/train.csv"] {
        let raw = std::fs::read(root.join(name)).map_err(err)?;
        let data = Dataset::read_from(raw.as_slice()).map_err(err)?;
        let mut again = Vec::new();
        data.write_to(&mut again).map_err(err)?;
        ensure!(again == raw, "{name} does not round-trip");
        ensure!(
            Dataset::read_from(again.as_slice()).map_err(err)? == data,
            "{name} changes on reread"
        );
    }
    let raw = std::fs::read(root.join("model/model.json")).map_err(err)?;
    let bundle = ModelBundle::from_bytes(&raw).map_err(err)?;
    ensure!(bundle.to_bytes() == raw, "model bundle does not round-trip");
    let reg = &bundle.pipeline.dual_net;
    let (params, scalers) = mlp::load(&mlp::save(&reg.params, &reg.scalers)).map_err(err)?;
    ensure!(
        params == reg.params && scalers == reg.scalers,
        "network file does not round-trip"
    );

    run_ok(root, &["solve", "--case", "case/twobus.m", "--out", "solve"])?;
    let line = std::fs::read_to_string(root.join("solve/solve.json")).map_err(err)?;
    let record = SolveRecord::from_json_line(line.trim()).map_err(err)?;
    ensure!(record.to_json_line() == line.trim(), "solve record does not round-trip");
    ensure!(record.result.converged(), "flat-start solve did not converge");
    run_ok(
        root,
        &[
            "solve",
            "--case",
            "case/twobus.m",
            "--out",
            "solve2",
            "--start",
            "file",
            "--init",
            "solve/solve.json",
        ],
    )?;

    // Refusals: a different network, a missing case.
    let other = p.to_network_capped(1.5);
    std::fs::write(root.join("other.m"), write_matpower_case(&other, "other")).map_err(err)?;
    run_refused(
        root,
        &[
            "train", "--case", "other.m", "--data", "data", "--out", "x", "--seed", "1",
        ],
        "fingerprint",
    )?;
    run_refused(
        root,
        &[
            "eval",
            "--case",
            "other.m",
            "--model",
            "model/model.json",
            "--data",
            "data",
            "--out",
            "x",
            "--seed",
            "1",
        ],
        "fingerprint",
    )?;
    run_refused(
        root,
        &[
            "solve",
            "--case",
            "other.m",
            "--out",
            "x",
            "--start",
            "file",
            "--init",
            "solve/solve.json",
        ],
        "fingerprint",
    )?;
    run_refused(root, &["solve", "--case", "missing.m", "--out", "x"], "case")?;
    run_refused(root, &["generate", "--case", "case/twobus.m", "--out", "x"], "config")?;
    ensure!(
        !root.join("x").join("pool.csv").exists(),
        "refused command wrote output"
    );
    within_time(
        t0,
        600,
        format!(
            "{} artifacts ({bytes} bytes) identical across runs; formats round-trip; alg1 ratio {ratio:.6}",
            ARTIFACTS.len() + 1
        ),
    )
}

fn criterion_7() -> Outcome {
    let mut worst = 0.0f64;
    for (c1, g, b) in [(1.0, 1.0, 5.0), (2.5, 0.5, 3.0), (0.3, 2.0, 8.0)] {
        let p = TwoBusParams {
            g,
            b,
            cost: CostPolynomial::linear(c1),
            load: 0.8,
        };
        for k in 0..1000 {
            let mu = 0.01 + 100.0 * k as f64 / 999.0;
            let theta = minimizer_map(&p, mu).map_err(err)?;
            let closed = ((mu - c1) / (mu + c1) * b / g).atan();
            worst = worst.max((theta - closed).abs());
        }
    }
    ensure!(worst <= 1e-14, "largest deviation from the closed form {worst:e}");
    let p = TwoBusParams {
        cost: CostPolynomial::linear(1.0),
        ..TwoBusParams::canonical()
    };
    let at_one = minimizer_map(&p, 1.0).map_err(err)?;
    ensure!(at_one == 0.0, "mu = c' gives {at_one:e}, expected exactly 0");
    Ok(format!(
        "max deviation {worst:e} over 3 x 1000 multipliers; mu = c' gives 0"
    ))
}

fn report(n: usize, name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
        let msg = p
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        Err(format!("panicked: {msg}"))
    });
    match outcome {
        Ok(detail) => {
            println!("criterion {n} [{name}]: PASS ({detail})");
            true
        }
        Err(detail) => {
            println!("criterion {n} [{name}]: FAIL ({detail})");
            false
        }
    }
}

fn main() {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let net = TwoBusParams::canonical().to_network();
    let pool = build_pool(&net, 500, 5).expect("two-bus pool");
    println!("two-bus pool: {} samples over 500 loads", pool.samples.len());
    let results = [
        report(1, "gradients", criterion_1),
        report(2, "two-bus oracle equivalence", criterion_2),
        report(3, "basin property", criterion_3),
        report(4, "local-fraction trend", || criterion_4(&pool, &net)),
        report(5, "iteration direction", || criterion_5(&pool, &net)),
        report(6, "determinism and persistence", criterion_6),
        report(7, "closed-form minimizer map", criterion_7),
    ];
    let passed = results.iter().filter(|&&r| r).count();
    println!("acceptance: {passed}/{} criteria passed", results.len());
    if passed != results.len() {
        std::process::exit(1);
    }
}
