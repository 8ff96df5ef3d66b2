//! `aoi-marl`: train single runs and sweeps, then summarize their metrics.
//!
//! Exit codes: 0 on success, 2 for invalid configuration or input files,
//! 3 for runtime failures (I/O, training errors, failed sweep runs).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};

use aoi_marl::experiment::{
    aggregate_dir, export_plot_data, parse_config, run_sweep, run_to_file, summary_table, write_atomic,
    ExperimentConfig, RunSpec, RunStatus, TailWindow,
};
use aoi_marl::marl::Algorithm;

const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;

#[derive(Parser)]
#[command(name = "aoi-marl", version, about = "Multi-platoon C-V2X training experiments")]
struct Cli {
    /// Log more (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct ConfigArgs {
    /// Experiment config (TOML). Omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory for metrics files (overrides `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Training episodes per run (overrides `train.episodes`).
    #[arg(long)]
    episodes: Option<usize>,
    /// Use only this seed (overrides `sweep.seeds`).
    #[arg(long)]
    seed: Option<u64>,
    /// Use only this algorithm (overrides `sweep.algorithms`).
    #[arg(long)]
    algo: Option<Algorithm>,
}

#[derive(Args)]
struct TailArgs {
    /// Converged metrics average over this share of final episodes.
    #[arg(long, default_value_t = 0.2, conflicts_with = "tail_episodes")]
    tail_fraction: f64,
    /// Converged metrics average over this many final episodes.
    #[arg(long)]
    tail_episodes: Option<usize>,
}

impl TailArgs {
    fn window(&self) -> TailWindow {
        match self.tail_episodes {
            Some(n) => TailWindow::Episodes(n),
            None => TailWindow::Fraction(self.tail_fraction),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Train one run: the first gap, size, algorithm and seed of the config unless overridden.
    Run {
        #[command(flatten)]
        config: ConfigArgs,
        /// Intra-platoon gap, metres.
        #[arg(long)]
        gap: Option<f64>,
        /// Followers per platoon.
        #[arg(long)]
        size: Option<usize>,
    },
    /// Train every sweep point missing from the output directory.
    Sweep {
        #[command(flatten)]
        config: ConfigArgs,
        /// Runs trained in parallel.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Print converged AoI, CAM probability and reward per sweep point.
    Aggregate {
        /// Directory holding metrics files.
        dir: PathBuf,
        #[command(flatten)]
        tail: TailArgs,
    },
    /// Write plot-data tables for the metrics in a directory.
    Export {
        /// Directory holding metrics files.
        dir: PathBuf,
        /// Destination of the tables (default: `<dir>/plots`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        tail: TailArgs,
    },
    /// Print the effective configuration as TOML.
    Config {
        #[command(flatten)]
        config: ConfigArgs,
    },
}

/// A failure and the exit code class it belongs to.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn config_failure(error: anyhow::Error) -> Failure {
    Failure {
        code: EXIT_CONFIG,
        error,
    }
}

/// Library errors about bad input are configuration failures; the rest are runtime failures.
fn classify(error: anyhow::Error) -> Failure {
    let code = match error.downcast_ref::<aoi_marl::Error>() {
        Some(aoi_marl::Error::Config(_) | aoi_marl::Error::Parse { .. }) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    };
    Failure { code, error }
}

fn load_config(args: &ConfigArgs) -> Result<ExperimentConfig, Failure> {
    let mut config = match &args.config {
        Some(path) => parse_config(path).map_err(|e| config_failure(e.into()))?,
        None => ExperimentConfig::default(),
    };
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(episodes) = args.episodes {
        config.train.episodes = episodes;
    }
    if let Some(seed) = args.seed {
        config.sweep.seeds = vec![seed];
    }
    if let Some(algo) = args.algo {
        config.sweep.algorithms = vec![algo];
    }
    config
        .validate()
        .context("invalid configuration after command-line overrides")
        .map_err(config_failure)?;
    Ok(config)
}

/// Keep the effective config next to the metrics it produced.
fn save_config(config: &ExperimentConfig) -> Result<()> {
    let dir = &config.output_dir;
    std::fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    write_atomic(&dir.join("config.toml"), &config.to_toml_string()?)?;
    Ok(())
}

fn run(args: &ConfigArgs, gap: Option<f64>, size: Option<usize>) -> Result<(), Failure> {
    let mut config = load_config(args)?;
    if let Some(gap) = gap {
        config.sweep.gaps_m = vec![gap];
    }
    if let Some(size) = size {
        config.sweep.platoon_sizes = vec![size];
    }
    config.validate().map_err(|e| config_failure(e.into()))?;
    let spec = RunSpec {
        algorithm: config.sweep.algorithms[0],
        seed: config.sweep.seeds[0],
        gap_m: config.sweep.gaps_m[0],
        platoon_size: config.sweep.platoon_sizes[0],
    };
    save_config(&config).map_err(classify)?;
    let path = run_to_file(&config, &spec, &config.output_dir)
        .with_context(|| format!("run {} failed", spec.file_stem()))
        .map_err(classify)?;
    println!("{}", path.display());
    Ok(())
}

fn sweep(args: &ConfigArgs, jobs: usize) -> Result<(), Failure> {
    let config = load_config(args)?;
    save_config(&config).map_err(classify)?;
    let report = run_sweep(&config, jobs).map_err(|e| classify(e.into()))?;
    let mut failed = 0;
    for (spec, status) in &report.runs {
        match status {
            RunStatus::Written(p) => println!("wrote {}", p.display()),
            RunStatus::Skipped(p) => println!("skipped {} (exists)", p.display()),
            RunStatus::Failed(e) => {
                failed += 1;
                eprintln!("error: {}: {e}", spec.file_stem());
            }
        }
    }
    if failed > 0 {
        return Err(Failure {
            code: EXIT_RUNTIME,
            error: anyhow!("{failed} of {} runs failed", report.runs.len()),
        });
    }
    Ok(())
}

fn summarize(dir: &Path, tail: &TailArgs) -> Result<aoi_marl::experiment::Summary, Failure> {
    if !dir.is_dir() {
        return Err(Failure {
            code: EXIT_RUNTIME,
            error: anyhow!("{} is not a directory", dir.display()),
        });
    }
    aggregate_dir(dir, tail.window())
        .with_context(|| format!("cannot summarize {}", dir.display()))
        .map_err(classify)
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run { config, gap, size } => run(&config, gap, size),
        Command::Sweep { config, jobs } => sweep(&config, jobs),
        Command::Aggregate { dir, tail } => {
            print!("{}", summary_table(&summarize(&dir, &tail)?));
            Ok(())
        }
        Command::Export { dir, out, tail } => {
            let summary = summarize(&dir, &tail)?;
            let out = out.unwrap_or_else(|| dir.join("plots"));
            for path in export_plot_data(&summary, &out).map_err(|e| classify(e.into()))? {
                println!("{}", path.display());
            }
            Ok(())
        }
        Command::Config { config } => {
            let config = load_config(&config)?;
            let text = config.to_toml_string().map_err(|e| classify(e.into()))?;
            print!("{text}");
            Ok(())
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(cli.verbose);
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error:#}");
            ExitCode::from(code)
        }
    }
}
