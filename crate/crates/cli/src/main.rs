//! `lagopf`: solve cases, build datasets, train and evaluate warm-start models.
//!
//! Failures print one line, `error[<class>]: <message>`, and exit with 1.

mod commands;
mod config;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lagopf::dataset::DatasetError;
use lagopf::matpower::ParseError;
use lagopf::mlp::MlpError;
use lagopf::pipeline::PipelineError;
use lagopf::solver::SolverError;
use lagopf::twobus::TwoBusError;

#[derive(Parser)]
#[command(
    name = "lagopf",
    version,
    about = "Learned Lagrangian warm starts for AC optimal power flow"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Directory all outputs are written to. Created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// TOML run configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum StartArg {
    Flat,
    Random,
    File,
}

#[derive(Subcommand)]
enum Command {
    /// Solve one ACOPF instance and write its solve record.
    Solve {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "flat")]
        start: StartArg,
        /// Solve record whose point initializes `--start file`.
        #[arg(long)]
        init: Option<PathBuf>,
        /// JSON load profile `{"p": [...], "q": [...]}` in per-unit; nominal otherwise.
        #[arg(long)]
        load: Option<PathBuf>,
        /// Multiplies every load.
        #[arg(long, default_value_t = 1.0)]
        load_scale: f64,
        /// Initial penalty parameter.
        #[arg(long)]
        rho: Option<f64>,
    },
    /// Sample loads, multi-start each, and write the pool and a mixed split.
    Generate {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        variation_pct: Option<f64>,
        #[arg(long)]
        local_fraction: Option<f64>,
        #[arg(long)]
        k_starts: Option<usize>,
    },
    /// Train the warm-start networks and the baseline on a generated split.
    Train {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Directory holding `train.csv` and optionally `test.csv`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        hidden_width: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Compare learned warm starts, random starts and the baseline on test loads.
    Eval {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Model bundle written by `train`.
        #[arg(long)]
        model: PathBuf,
        /// Directory holding `test.csv`.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        k_starts: Option<usize>,
    },
    /// Retrain and evaluate at several local fractions of the same pool.
    Sweep {
        #[arg(long)]
        case: PathBuf,
        #[command(flatten)]
        common: Common,
        /// Directory holding `pool.csv`.
        #[arg(long)]
        data: PathBuf,
        /// Comma-separated local fractions.
        #[arg(long, value_delimiter = ',', default_value = "0,0.25,0.5,0.75,1")]
        fractions: Vec<f64>,
        #[arg(long)]
        hidden_width: Option<usize>,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        k_starts: Option<usize>,
    },
    /// Landscape tables and oracle constants of the two-bus fixture.
    Twobus {
        #[command(flatten)]
        common: Common,
        /// Penalty parameter of the penalized landscape.
        #[arg(long)]
        rho: Option<f64>,
        /// Comma-separated multipliers for the Lagrangian landscapes.
        #[arg(long, value_delimiter = ',')]
        mu: Option<Vec<f64>>,
        #[arg(long)]
        resolution: Option<usize>,
    },
}

/// An error tagged with its class for the one-line report.
#[derive(Debug)]
pub struct Classified {
    pub class: &'static str,
    pub message: String,
}

impl fmt::Display for Classified {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Classified {}

pub fn fail(class: &'static str, message: impl Into<String>) -> anyhow::Error {
    Classified {
        class,
        message: message.into(),
    }
    .into()
}

fn classify(err: &anyhow::Error) -> &'static str {
    for cause in err.chain() {
        if let Some(c) = cause.downcast_ref::<Classified>() {
            return c.class;
        }
        if let Some(e) = cause.downcast_ref::<PipelineError>() {
            return match e {
                PipelineError::Fingerprint { .. } | PipelineError::Dataset(DatasetError::Fingerprint { .. }) => {
                    "fingerprint"
                }
                PipelineError::Dataset(_) => "dataset",
                PipelineError::Mlp(_) | PipelineError::Bundle(_) => "model",
                PipelineError::Solver(_) | PipelineError::TargetFailures { .. } => "solver",
                PipelineError::Empty => "dataset",
                PipelineError::Io(_) => "io",
            };
        }
        if let Some(e) = cause.downcast_ref::<DatasetError>() {
            return match e {
                DatasetError::Fingerprint { .. } => "fingerprint",
                DatasetError::Io(_) => "io",
                _ => "dataset",
            };
        }
        if cause.is::<ParseError>() {
            return "parse";
        }
        if cause.is::<SolverError>() {
            return "solver";
        }
        if cause.is::<MlpError>() {
            return "model";
        }
        if cause.is::<TwoBusError>() {
            return "twobus";
        }
        if cause.is::<std::io::Error>() {
            return "io";
        }
    }
    "internal"
}

fn one_line(err: &anyhow::Error) -> String {
    let parts: Vec<String> = err.chain().map(|c| c.to_string()).collect();
    let mut joined = parts.join(": ");
    joined.retain(|c| c != '\r');
    joined.replace('\n', " ")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve {
            case,
            common,
            start,
            init,
            load,
            load_scale,
            rho,
        } => commands::solve(&case, &common, start, init.as_deref(), load.as_deref(), load_scale, rho),
        Command::Generate {
            case,
            common,
            samples,
            variation_pct,
            local_fraction,
            k_starts,
        } => commands::generate(&case, &common, samples, variation_pct, local_fraction, k_starts),
        Command::Train {
            case,
            common,
            data,
            hidden_width,
            epochs,
        } => commands::train(&case, &common, &data, hidden_width, epochs),
        Command::Eval {
            case,
            common,
            model,
            data,
            k_starts,
        } => commands::eval(&case, &common, &model, &data, k_starts),
        Command::Sweep {
            case,
            common,
            data,
            fractions,
            hidden_width,
            epochs,
            k_starts,
        } => commands::sweep(&case, &common, &data, fractions, hidden_width, epochs, k_starts),
        Command::Twobus {
            common,
            rho,
            mu,
            resolution,
        } => commands::twobus(&common, rho, mu, resolution),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", classify(&e), one_line(&e));
            ExitCode::FAILURE
        }
    }
}
