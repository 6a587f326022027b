use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use stochfsi_core::config::{RunConfig, RunMode};
use stochfsi_core::diagnostics::SweepAxis;
use stochfsi_core::output::{execute, RunOutcome};

/// Stochastic fluid-structure splitting scheme driver.
#[derive(Parser)]
#[command(name = "stochfsi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Path,
    Ensemble,
    Sweep,
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    #[value(name = "N")]
    Steps,
    #[value(name = "epsilon")]
    Epsilon,
}

#[derive(Subcommand)]
enum Command {
    /// Run a configuration and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        mode: Option<Mode>,
        /// Number of Monte Carlo paths.
        #[arg(long)]
        paths: Option<usize>,
        /// Master seed of the path keys.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (defaults to `output.directory`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a configuration and its initial data without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Rerun an ensemble over one parameter axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(long)]
        paths: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Worker cap from `STOCHFSI_THREADS`.
fn threads_from_env() -> Result<Option<usize>> {
    match std::env::var("STOCHFSI_THREADS") {
        Ok(v) => {
            let n: usize = v.trim().parse().with_context(|| format!("STOCHFSI_THREADS={v:?} is not a count"))?;
            anyhow::ensure!(n > 0, "STOCHFSI_THREADS must be positive");
            Ok(Some(n))
        }
        Err(_) => Ok(None),
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    RunConfig::load(path).with_context(|| format!("invalid configuration {}", path.display()))
}

fn run(config: RunConfig, out: Option<PathBuf>) -> Result<ExitCode> {
    config.validate()?;
    let out = out.unwrap_or_else(|| PathBuf::from(&config.output.directory));
    let outcome = execute(&config, threads_from_env()?, &out)?;
    match &outcome {
        RunOutcome::Path { report } | RunOutcome::Ensemble { report } => {
            println!(
                "{} of {} paths completed; mean max E = {:e}; stopped fraction = {}",
                report.completed, report.paths, report.max_energy.mean, report.stopped_fraction
            );
            for f in &report.failures {
                eprintln!("path {}: {}", f.path, f.error);
            }
        }
        RunOutcome::Sweep { table } => {
            for row in &table.rows {
                println!("{} = {}: mean max E = {:e}, mean div = {:e}", table.axis, row.value, row.report.max_energy.mean, row.report.div_l2.mean);
            }
            if let Some(s) = table.div_slope {
                println!("divergence slope vs epsilon: {s}");
            }
            if let Some(s) = table.stochastic_error_slope {
                println!("stochastic error slope vs dt: {s}");
            }
        }
    }
    println!("artifacts written to {}", out.display());
    Ok(if outcome.failures() > 0 { ExitCode::FAILURE } else { ExitCode::SUCCESS })
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => {
            let c = load(&config)?;
            println!("ok: N = {}, dt = {:e}, mesh {}x{}", c.time.steps, c.dt(), c.domain.nz, c.domain.nr);
            Ok(ExitCode::SUCCESS)
        }
        Command::Run { config, mode, paths, seed, out } => {
            let mut c = load(&config)?;
            if let Some(m) = mode {
                c.run.mode = match m {
                    Mode::Path => RunMode::Path,
                    Mode::Ensemble => RunMode::Ensemble,
                    Mode::Sweep => RunMode::Sweep,
                };
            }
            if let Some(p) = paths {
                c.run.paths = p;
            }
            if let Some(s) = seed {
                c.run.master_seed = s;
            }
            run(c, out)
        }
        Command::Sweep { config, axis, values, paths, seed, out } => {
            let mut c = load(&config)?;
            c.run.mode = RunMode::Sweep;
            c.run.sweep_axis = Some(
                match axis {
                    Axis::Steps => SweepAxis::Steps,
                    Axis::Epsilon => SweepAxis::Epsilon,
                }
                .to_string(),
            );
            c.run.sweep_values = values;
            if let Some(p) = paths {
                c.run.paths = p;
            }
            if let Some(s) = seed {
                c.run.master_seed = s;
            }
            run(c, out)
        }
    }
}
