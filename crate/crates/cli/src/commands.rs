use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::json;

use lagopf::dataset::{build_samples, generate_loads, mix, split, Dataset};
use lagopf::matpower::{parse_matpower_case, write_matpower_case};
use lagopf::network::{nominal_load, LoadProfile, Network};
use lagopf::opf::OperatingPoint;
use lagopf::pipeline::{
    baseline_train, evaluate, sweep_local_fraction, sweep_plot_csv, train_pipeline, EvalConfig, FitSummary,
    ModelBundle, SweepConfig, TargetCache,
};
use lagopf::solver::{random_start, solve_acopf, SolveRecord, StartKind};
use lagopf::twobus::{find_solutions, minimizer_map, stationarity, sweep_landscape, TwoBusParams};

use crate::config::RunConfig;
use crate::{fail, Common, StartArg};

fn read_case(path: &Path) -> Result<Network> {
    let text = match std::fs::read_to_string(path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(fail("case", format!("case file not found: {}", path.display())))
        }
        Err(e) => return Err(fail("case", format!("cannot read case file {}: {e}", path.display()))),
    };
    parse_matpower_case(&text).with_context(|| format!("case file {}", path.display()))
}

fn out_dir(common: &Common) -> Result<&Path> {
    std::fs::create_dir_all(&common.out)
        .with_context(|| format!("cannot create output directory {}", common.out.display()))?;
    Ok(&common.out)
}

fn write(dir: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
}

fn read_dataset(path: PathBuf, net: &Network) -> Result<Dataset> {
    if !path.exists() {
        return Err(fail("dataset", format!("dataset file not found: {}", path.display())));
    }
    let data = Dataset::read(&path).with_context(|| format!("dataset {}", path.display()))?;
    data.check_network(net)
        .with_context(|| format!("dataset {}", path.display()))?;
    Ok(data)
}

fn read_load(path: &Path, net: &Network) -> Result<LoadProfile> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read load file {}", path.display()))?;
    let load: LoadProfile =
        serde_json::from_str(&text).map_err(|e| fail("config", format!("load file {}: {e}", path.display())))?;
    if load.p.len() != net.n_bus() || load.q.len() != net.n_bus() {
        return Err(fail(
            "config",
            format!(
                "load file {} has {} buses, case has {}",
                path.display(),
                load.p.len(),
                net.n_bus()
            ),
        ));
    }
    Ok(load)
}

/// Writes `solve.json` (one solve record) and `timing.csv`. The record's
/// wall time is zeroed so the record itself is reproducible.
pub fn solve(
    case: &Path,
    common: &Common,
    start: StartArg,
    init: Option<&Path>,
    load: Option<&Path>,
    load_scale: f64,
    rho: Option<f64>,
) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let net = read_case(case)?;
    let seed = cfg.seed(common.seed, false)?;
    let solver = cfg.solver(seed, rho)?;
    if !(load_scale.is_finite() && load_scale >= 0.0) {
        return Err(fail("config", "load-scale must be a finite non-negative number"));
    }
    let mut load = match load {
        Some(p) => read_load(p, &net)?,
        None => nominal_load(&net),
    };
    load.p
        .iter_mut()
        .chain(load.q.iter_mut())
        .for_each(|x| *x *= load_scale);

    let (x0, kind) = match start {
        StartArg::Flat => (OperatingPoint::flat(&net), StartKind::Flat),
        StartArg::Random => (random_start(&net, &solver, 0), StartKind::Random),
        StartArg::File => {
            let path = init.ok_or_else(|| fail("config", "--start file needs --init <solve record>"))?;
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read start record {}", path.display()))?;
            let record = SolveRecord::from_json_line(text.trim())?;
            let expected = net.fingerprint();
            if record.fingerprint != expected {
                return Err(fail(
                    "fingerprint",
                    format!(
                        "start record {} was solved on network {}, case is {expected}",
                        path.display(),
                        record.fingerprint
                    ),
                ));
            }
            (record.result.point, StartKind::File)
        }
    };
    let dir = out_dir(common)?;
    let mut result = solve_acopf(&net, &load, &x0, &solver)?;
    result.start = kind;
    let wall = std::mem::take(&mut result.wall_time);
    let record = SolveRecord {
        fingerprint: net.fingerprint(),
        result,
    };
    write(dir, "solve.json", record.to_json_line() + "\n")?;
    write(dir, "timing.csv", format!("wall_time\n{wall}\n"))?;
    if !record.result.converged() {
        return Err(fail(
            "solve",
            format!(
                "solver stopped with status {:?} after {} outer iterations (violation {:.3e})",
                record.result.status, record.result.outer_iterations, record.result.violation
            ),
        ));
    }
    Ok(())
}

/// Writes `pool.csv` (every distinct solution of every load), the mixed
/// `train.csv`/`test.csv` split and `generate.json`.
pub fn generate(
    case: &Path,
    common: &Common,
    samples: Option<usize>,
    variation_pct: Option<f64>,
    local_fraction: Option<f64>,
    k_starts: Option<usize>,
) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let net = read_case(case)?;
    let seed = cfg.seed(common.seed, true)?;
    let k = cfg.k_starts(k_starts)?;
    let solver = cfg.solver(seed, None)?;
    let mut spec = cfg.dataset.clone();
    spec.n_samples = samples.unwrap_or(spec.n_samples);
    spec.load_variation_pct = variation_pct.unwrap_or(spec.load_variation_pct);
    spec.local_fraction = local_fraction.unwrap_or(spec.local_fraction);
    spec.seed = seed;
    spec.validate()?;
    let dir = out_dir(common)?;

    let loads = generate_loads(&net, spec.n_samples, spec.load_variation_pct, seed);
    let built = build_samples(&net, &loads, k, &solver);
    if built.samples.is_empty() {
        return Err(fail(
            "solver",
            format!("none of the {} loads produced a converged solve", loads.len()),
        ));
    }
    let pool = Dataset::new(&net, built.samples);
    let mixed = mix(&pool, spec.local_fraction, seed)?;
    let (train, test) = split(&mixed, spec.train_fraction, seed);
    pool.write(&dir.join("pool.csv"))?;
    train.write(&dir.join("train.csv"))?;
    test.write(&dir.join("test.csv"))?;
    let summary = json!({
        "fingerprint": net.fingerprint(),
        "seed": seed,
        "k_starts": k,
        "loads": loads.len(),
        "failed_loads": built.failed_loads,
        "pool_samples": pool.samples.len(),
        "local_fraction": spec.local_fraction,
        "realized_local_fraction": mixed.fraction_local(),
        "train_samples": train.samples.len(),
        "test_samples": test.samples.len(),
    });
    write(dir, "generate.json", serde_json::to_string_pretty(&summary)? + "\n")
}

fn loss_csv(named: &[(&str, &FitSummary)]) -> String {
    let mut out = String::from("epoch");
    for (name, _) in named {
        write!(out, ",{name}_train,{name}_validation").unwrap();
    }
    out.push('\n');
    let epochs = named.iter().map(|(_, s)| s.history.train.len()).max().unwrap_or(0);
    let cell = |v: &[f64], e: usize| v.get(e).map(|x| x.to_string()).unwrap_or_default();
    for e in 0..epochs {
        write!(out, "{e}").unwrap();
        for (_, s) in named {
            write!(out, ",{},{}", cell(&s.history.train, e), cell(&s.history.validation, e)).unwrap();
        }
        out.push('\n');
    }
    out
}

fn mse_csv(named: &[(&str, &FitSummary)]) -> String {
    let mut out = String::from("network,train_mse,test_mse\n");
    for (name, s) in named {
        let test = s.test_mse.map(|x| x.to_string()).unwrap_or_default();
        writeln!(out, "{name},{},{test}", s.train_mse).unwrap();
    }
    out
}

/// Writes `model.json`, `loss.csv` (per-epoch losses of the three networks)
/// and `fit.csv`.
pub fn train(
    case: &Path,
    common: &Common,
    data: &Path,
    hidden_width: Option<usize>,
    epochs: Option<usize>,
) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let net = read_case(case)?;
    let seed = cfg.seed(common.seed, true)?;
    let tcfg = cfg.train(net.n_bus(), seed, hidden_width, epochs)?;
    let solver = cfg.solver(seed, None)?;
    let train_set = read_dataset(data.join("train.csv"), &net)?;
    let test_path = data.join("test.csv");
    let test_set = if test_path.exists() {
        Some(read_dataset(test_path, &net)?)
    } else {
        None
    };
    let dir = out_dir(common)?;

    let mut cache = TargetCache::default();
    let (pipeline, fits) = train_pipeline(&net, &train_set, test_set.as_ref(), &solver, &tcfg, &mut cache)?;
    let (baseline, base_fit) = baseline_train(&net, &train_set, test_set.as_ref(), &tcfg)?;
    let named = [
        ("dual", &fits.dual),
        ("lagrangian", &fits.lagrangian),
        ("baseline", &base_fit),
    ];
    let bundle = ModelBundle {
        pipeline,
        baseline: Some(baseline),
    };
    write(dir, "model.json", bundle.to_bytes())?;
    write(dir, "loss.csv", loss_csv(&named))?;
    write(dir, "fit.csv", mse_csv(&named))
}

fn load_bundle(path: &Path, net: &Network) -> Result<ModelBundle> {
    if !path.exists() {
        return Err(fail("model", format!("model file not found: {}", path.display())));
    }
    Ok(ModelBundle::load_for(path, net).with_context(|| format!("model {}", path.display()))?)
}

/// Writes the report directory: `report.csv`, `summary.csv`, `plot.csv`
/// and `timing.csv`.
pub fn eval(case: &Path, common: &Common, model: &Path, data: &Path, k_starts: Option<usize>) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let net = read_case(case)?;
    let seed = cfg.seed(common.seed, true)?;
    let ecfg = EvalConfig {
        solver: cfg.solver(seed, None)?,
        k_starts: cfg.k_starts(k_starts)?,
        seed,
    };
    let bundle = load_bundle(model, &net)?;
    let baseline = bundle
        .baseline
        .ok_or_else(|| fail("model", format!("{} holds no baseline model", model.display())))?;
    let test = read_dataset(data.join("test.csv"), &net)?;
    let loads: Vec<LoadProfile> = test.samples.iter().map(|s| s.load.clone()).collect();
    let dir = out_dir(common)?;
    let report = evaluate(&net, &loads, &bundle.pipeline, &baseline, &ecfg)?;
    report.write_dir(dir)?;
    Ok(())
}

/// Writes `plot.csv` with one row per fraction and a report directory
/// `fraction_<f>` per fraction.
#[allow(clippy::too_many_arguments)]
pub fn sweep(
    case: &Path,
    common: &Common,
    data: &Path,
    fractions: Vec<f64>,
    hidden_width: Option<usize>,
    epochs: Option<usize>,
    k_starts: Option<usize>,
) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let net = read_case(case)?;
    let seed = cfg.seed(common.seed, true)?;
    if fractions.is_empty() || fractions.iter().any(|f| !(0.0..=1.0).contains(f)) {
        return Err(fail("config", "fractions must be a non-empty list within [0, 1]"));
    }
    let scfg = SweepConfig {
        fractions,
        train_fraction: cfg.dataset.train_fraction,
        train: cfg.train(net.n_bus(), seed, hidden_width, epochs)?,
        eval: EvalConfig {
            solver: cfg.solver(seed, None)?,
            k_starts: cfg.k_starts(k_starts)?,
            seed,
        },
        seed,
    };
    let pool = read_dataset(data.join("pool.csv"), &net)?;
    let dir = out_dir(common)?;
    let points = sweep_local_fraction(&net, &pool, &scfg)?;
    for p in &points {
        p.report.write_dir(&dir.join(format!("fraction_{:.2}", p.fraction)))?;
    }
    write(dir, "plot.csv", sweep_plot_csv(&points))
}

const MAP_POINTS: usize = 101;

/// Writes `landscape.csv`, `minimizer_map.csv`, `constants.json` and the
/// fixture as a case file, `twobus.m`.
pub fn twobus(common: &Common, rho: Option<f64>, mu: Option<Vec<f64>>, resolution: Option<usize>) -> Result<()> {
    let cfg = RunConfig::load(common.config.as_deref())?;
    let p = TwoBusParams::canonical();
    let s = find_solutions(&p)?;
    let rho = rho.unwrap_or(cfg.twobus.rho);
    if !(rho > 0.0) {
        return Err(fail("config", "rho must be positive"));
    }
    let mus = match mu {
        Some(m) => m,
        None if !cfg.twobus.mus.is_empty() => cfg.twobus.mus.clone(),
        None => vec![s.mu_global, 0.5 * (s.mu_global + s.mu_local), s.mu_local],
    };
    let resolution = resolution.unwrap_or(cfg.twobus.resolution);
    let dir = out_dir(common)?;

    let landscape = sweep_landscape(&p, rho, &mus, resolution)?;
    let mut map = String::from("mu,theta,stationarity\n");
    for k in 0..MAP_POINTS {
        let m = s.mu_global + (s.mu_local - s.mu_global) * k as f64 / (MAP_POINTS - 1) as f64;
        let t = minimizer_map(&p, m)?;
        writeln!(map, "{m:e},{t:e},{:e}", stationarity(&p, t, m)).unwrap();
    }
    let constants = json!({
        "g": p.g,
        "b": p.b,
        "cost": {"c0": p.cost.c0, "c1": p.cost.c1, "c2": p.cost.c2},
        "load": p.load,
        "theta_global": s.theta_global,
        "theta_local": s.theta_local,
        "mu_global": s.mu_global,
        "mu_local": s.mu_local,
        "cost_global": s.cost_global,
        "cost_local": s.cost_local,
        "cost_ratio": s.cost_local / s.cost_global,
        "rho": rho,
        "mus": mus,
        "resolution": resolution,
    });
    write(dir, "landscape.csv", landscape.to_csv())?;
    write(dir, "minimizer_map.csv", map)?;
    write(dir, "constants.json", serde_json::to_string_pretty(&constants)? + "\n")?;
    write(dir, "twobus.m", write_matpower_case(&p.to_network(), "twobus"))
}
