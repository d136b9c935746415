//! `mtkrr`: risk curves, oracle comparisons, bound checks and Monte Carlo
//! tables for multi-task kernel ridge regression.
//!
//! Exit codes: 0 on success, 1 on error, 2 when `verify-bounds` finds a violation.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use mtkrr::experiments::Pi2Scale;
use mtkrr::risk::RiskParams;
use mtkrr::scenarios::{ScenarioKind, ScenarioSpec};

#[derive(Parser, Debug)]
#[command(name = "mtkrr", version, about = "Oracle risks of multi-task kernel ridge regression")]
struct Cli {
    /// Worker threads for replicate and task parallelism (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the template risk R(lambda) with its bias and variance terms as CSV.
    RiskCurve(CurveCmd),
    /// Compare the multi-task and single-task oracles on one scenario; writes JSON.
    Oracle(OracleCmd),
    /// Check the risk bounds over a parameter grid; exits 2 on any violation.
    VerifyBounds(BoundsCmd),
    /// Run one Monte Carlo experiment from the [experiment] config section.
    Experiment(ConfigCmd),
    /// Run a table of experiments from the [table] config section.
    Table(ConfigCmd),
    /// Run a grid of experiments from the [heatmap] config section; writes CSV and SVG.
    Heatmap(ConfigCmd),
}

#[derive(Args, Debug)]
struct CurveCmd {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    beta: f64,
    #[arg(long)]
    delta: f64,
    /// Signal constant C.
    #[arg(long)]
    c: f64,
    #[arg(long, default_value_t = 1e-8)]
    lambda_min: f64,
    #[arg(long, default_value_t = 10.0)]
    lambda_max: f64,
    #[arg(long, default_value_t = 200)]
    points: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum KindArg {
    H2points,
    H1out,
    SettingA,
    SettingB,
    SettingC,
    SettingD,
}

impl From<KindArg> for ScenarioKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::H2points => ScenarioKind::H2points,
            KindArg::H1out => ScenarioKind::H1out,
            KindArg::SettingA => ScenarioKind::SettingA,
            KindArg::SettingB => ScenarioKind::SettingB,
            KindArg::SettingC => ScenarioKind::SettingC,
            KindArg::SettingD => ScenarioKind::SettingD,
        }
    }
}

#[derive(Args, Debug)]
struct OracleCmd {
    #[arg(long, value_enum)]
    kind: KindArg,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    p: usize,
    #[arg(long, default_value_t = 1.0)]
    c1: f64,
    #[arg(long)]
    c2: f64,
    #[arg(long)]
    delta1: f64,
    #[arg(long)]
    delta2: Option<f64>,
    /// beta for synthetic spectra, spline order m for setting-b.
    #[arg(long)]
    beta_or_m: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    cluster_amplitude: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected BETA:DELTA, got {s:?}"))?;
    let num = |x: &str| x.trim().parse::<f64>().map_err(|e| format!("{x:?}: {e}"));
    Ok((num(a)?, num(b)?))
}

#[derive(Args, Debug)]
struct BoundsCmd {
    #[arg(long, value_delimiter = ',', default_values_t = [50usize, 200, 800])]
    n: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [1usize, 2, 5, 10])]
    p: Vec<usize>,
    #[arg(long, value_delimiter = ',', default_values_t = [0.5, 1.0, 2.0])]
    c: Vec<f64>,
    /// Comma-separated BETA:DELTA pairs.
    #[arg(long, value_delimiter = ',', value_parser = parse_pair, default_values = ["2:2", "4:2", "2:1.5"])]
    beta_delta: Vec<(f64, f64)>,
    #[arg(long, default_value_t = 1.0)]
    sigma2: f64,
    /// Relative slack allowed on the upper bound.
    #[arg(long, default_value_t = 1e-8)]
    slack: f64,
    /// Check the lower bound only where np/sigma2 reaches this value.
    #[arg(long, default_value_t = 200.0)]
    lower_min_snr: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
enum ScaleArg {
    /// Number of replicates.
    #[value(name = "N")]
    Replicates,
    /// Sample size of each replicate.
    #[value(name = "n")]
    SampleSize,
}

#[derive(Args, Debug)]
struct ConfigCmd {
    /// TOML file with the section for this subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Overrides pi2_scale from the config.
    #[arg(long, value_enum)]
    pi2_scale: Option<ScaleArg>,
}

impl ConfigCmd {
    fn scale(&self) -> Option<Pi2Scale> {
        self.pi2_scale.map(|s| match s {
            ScaleArg::Replicates => Pi2Scale::Replicates,
            ScaleArg::SampleSize => Pi2Scale::SampleSize,
        })
    }
}

enum Outcome {
    Done,
    Violation,
}

fn run(cli: Cli) -> Result<Outcome> {
    if let Some(jobs) = cli.jobs {
        anyhow::ensure!(jobs >= 1, "--jobs must be >= 1");
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring the thread pool")?;
    }
    match cli.command {
        Command::RiskCurve(a) => {
            let params = RiskParams::new(a.n, a.p, a.sigma2, a.beta, a.delta, a.c)?;
            commands::risk_curve(&commands::CurveArgs {
                params,
                lambda_min: a.lambda_min,
                lambda_max: a.lambda_max,
                points: a.points,
                out: &a.out,
            })?;
        }
        Command::Oracle(a) => {
            let spec = ScenarioSpec {
                kind: a.kind.into(),
                n: a.n,
                p: a.p,
                c1: a.c1,
                c2: a.c2,
                delta1: a.delta1,
                delta2: a.delta2,
                beta_or_m: a.beta_or_m,
                seed: a.seed,
                cluster_amplitude: a.cluster_amplitude,
            };
            commands::oracle(&spec, a.sigma2, &a.out)?;
        }
        Command::VerifyBounds(a) => {
            let grid = commands::BoundGrid {
                n: a.n,
                p: a.p,
                c: a.c,
                beta_delta: a.beta_delta,
                sigma2: a.sigma2,
                slack: a.slack,
                lower_min_snr: a.lower_min_snr,
            };
            if !commands::verify_bounds(&grid, &a.out)? {
                return Ok(Outcome::Violation);
            }
        }
        Command::Experiment(a) => {
            let doc = config::load_document(&a.config)?;
            commands::experiment(&config::experiment(&doc, &a.config)?, a.scale())?;
        }
        Command::Table(a) => {
            let doc = config::load_document(&a.config)?;
            commands::table(&config::table(&doc, &a.config)?, a.scale())?;
        }
        Command::Heatmap(a) => {
            let doc = config::load_document(&a.config)?;
            commands::heatmap(&config::heatmap(&doc, &a.config)?, a.scale())?;
        }
    }
    Ok(Outcome::Done)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    // Usage errors exit 1, keeping 2 for bound violations.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => e.exit(),
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::Violation) => {
            log::error!("bound violations found");
            ExitCode::from(2)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(1)
        }
    }
}
