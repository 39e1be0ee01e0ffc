//! `dsf`: synthesize certified set families, run filtered episodes, sweep
//! coverage and compare the two safety filters.

mod commands;
mod config;
mod output;

use std::fmt;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dsf_core::{MembershipMode, ObjectiveMode};

use config::{ExperimentConfig, FilterChoice};

/// Invalid input from the user; exits with code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ObjectiveFlag {
    MaxTrace,
    MinTracePaper,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MembershipFlag {
    GlobalSum,
    LocalConservative,
}

#[derive(Debug, Parser)]
#[command(name = "dsf", version, about = "Distributed safety filters from structured robust invariant sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// Experiment configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to available parallelism.
    #[arg(long)]
    workers: Option<usize>,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    objective: Option<ObjectiveFlag>,
    #[arg(long, value_enum)]
    membership: Option<MembershipFlag>,
    #[arg(long, value_enum)]
    filter: Option<FilterChoice>,
    /// Certified family file, overriding the config.
    #[arg(long)]
    family: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Draw the Voronoi partition and write it.
    Partition(Common),
    /// Solve one invariant set per region and write the family.
    Synthesize(Common),
    /// Run filtered episodes against a family.
    Simulate(Common),
    /// Coverage fraction over a grid of (M, γ).
    Coverage(Common),
    /// Implicit versus explicit filter on random (x, u) pairs.
    Compare(Common),
}

impl Common {
    fn resolve(&self) -> Result<ExperimentConfig, ConfigError> {
        let mut cfg = ExperimentConfig::load(&self.config)?;
        if let Some(s) = self.seed {
            cfg.seed = s;
        }
        if let Some(o) = self.objective {
            cfg.objective = match o {
                ObjectiveFlag::MaxTrace => ObjectiveMode::MaximizeTrace,
                ObjectiveFlag::MinTracePaper => ObjectiveMode::MinimizeTrace,
            };
        }
        if let Some(m) = self.membership {
            cfg.membership = match m {
                MembershipFlag::GlobalSum => MembershipMode::GlobalSum,
                MembershipFlag::LocalConservative => MembershipMode::LocalConservative,
            };
        }
        if let Some(f) = self.filter {
            cfg.filter = f;
        }
        if let Some(f) = &self.family {
            cfg.family = Some(f.clone());
        }
        if self.workers == Some(0) {
            return Err(ConfigError("--workers: must be at least 1".into()));
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let (common, which) = match &cli.command {
        Command::Partition(c) => (c, "partition"),
        Command::Synthesize(c) => (c, "synthesize"),
        Command::Simulate(c) => (c, "simulate"),
        Command::Coverage(c) => (c, "coverage"),
        Command::Compare(c) => (c, "compare"),
    };
    let cfg = common.resolve()?;
    if let Some(w) = common.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global()?;
    }
    std::fs::create_dir_all(&common.out)?;
    let ctx = commands::Context { cfg: &cfg, out: &common.out, workers: common.workers };
    match which {
        "partition" => commands::partition(&ctx),
        "synthesize" => commands::synthesize(&ctx),
        "simulate" => commands::simulate(&ctx),
        "coverage" => commands::coverage(&ctx),
        _ => commands::compare(&ctx),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<ConfigError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
