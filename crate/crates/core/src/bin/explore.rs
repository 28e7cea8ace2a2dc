use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use explore_core::config::{CorruptionConfig, CorruptionMode, EnvConfig, ExperimentConfig};
use explore_core::envs::generate_prior_data;
use explore_core::mdp::dataset::{read_dataset, write_dataset, DatasetDims};
use explore_core::mdp::Environment;
use explore_core::runner::{report, run_experiment, run_sweep};
use explore_core::strategy::StrategyKind;
use explore_core::Error;

#[derive(Parser)]
#[command(name = "explore", version, about = "Optimistic reward labeling of prior data for exploration")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one strategy with one seed.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: u64,
        /// Overrides the config's strategy.
        #[arg(long)]
        strategy: Option<StrategyKind>,
    },
    /// Train every (strategy, seed) pair of the config and summarize.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Generate the config's prior dataset (before corruption).
    GenData {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a corrupted copy of a dataset.
    Corrupt {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        mode: Mode,
        #[arg(long)]
        out: PathBuf,
        /// Task whose goal defines the coverage hole and the orthogonal direction.
        #[arg(long, default_value = "point-maze-medium")]
        env: String,
        #[arg(long)]
        radius: Option<f64>,
        #[arg(long)]
        fraction: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Aggregate the run CSVs in a directory.
    Report {
        #[arg(long)]
        dir: PathBuf,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Mode {
    Orthogonal,
    Coverage,
    Subsample,
}

/// Training failures exit with 2; everything detected before training with 1.
struct Failure {
    code: u8,
    error: Error,
}

fn config_error(error: Error) -> Failure {
    Failure { code: 1, error }
}

fn classify(error: Error) -> Failure {
    let code = match error {
        Error::Config(_) | Error::Format { .. } => 1,
        _ => 2,
    };
    Failure { code, error }
}

fn load(path: &Path) -> Result<ExperimentConfig, Failure> {
    ExperimentConfig::from_path(path).map_err(config_error)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure { code, error }) => {
            eprintln!("error: {error}");
            ExitCode::from(code)
        }
    }
}

fn execute(command: Command) -> Result<(), Failure> {
    match command {
        Command::Run { config, seed, strategy } => {
            let mut cfg = load(&config)?;
            if let Some(s) = strategy {
                cfg.strategy = s;
            }
            let out = cfg.output_dir();
            let artifacts = run_experiment(&cfg, cfg.strategy, seed, &out).map_err(classify)?;
            println!("{}", artifacts.metrics.display());
            if let Some(ck) = artifacts.checkpoint {
                println!("{}", ck.display());
            }
        }
        Command::Sweep { config, threads } => {
            let cfg = load(&config)?;
            let threads = threads
                .or(cfg.threads)
                .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let outcome = run_sweep(&cfg, &cfg.output_dir(), threads).map_err(classify)?;
            for run in &outcome.runs {
                match &run.outcome {
                    Ok(a) => println!("ok     {} seed {}: {}", run.strategy, run.seed, a.metrics.display()),
                    Err(e) => println!("failed {} seed {}: {e}", run.strategy, run.seed),
                }
            }
            println!("{}", outcome.summary.display());
            let failed = outcome.failures();
            if failed > 0 {
                return Err(Failure {
                    code: 2,
                    error: Error::Usage(format!("{failed} of {} runs failed", outcome.runs.len())),
                });
            }
        }
        Command::GenData { config, out } => {
            let cfg = load(&config)?;
            let task = cfg.env.build().map_err(config_error)?;
            let data = generate_prior_data(&task, &cfg.dataset.spec()).map_err(classify)?;
            let spec = task.spec();
            let dims = DatasetDims {
                state_dim: spec.state_dim,
                action_dim: spec.action_dim,
            };
            write_dataset(&out, &data, dims).map_err(classify)?;
            println!("{} transitions -> {}", data.len(), out.display());
        }
        Command::Corrupt {
            input,
            mode,
            out,
            env,
            radius,
            fraction,
            seed,
        } => {
            let (data, dims) = read_dataset(&input, seed).map_err(config_error)?;
            let task = EnvConfig::named(&env).build().map_err(config_error)?;
            let corruption = CorruptionConfig {
                mode: match mode {
                    Mode::Orthogonal => CorruptionMode::Orthogonal,
                    Mode::Coverage => CorruptionMode::Coverage,
                    Mode::Subsample => CorruptionMode::Subsample,
                },
                radius,
                fraction,
                direction: None,
                seed,
            };
            let kept = corruption.apply(&task, &data).map_err(config_error)?;
            write_dataset(&out, &kept, dims).map_err(classify)?;
            println!("kept {} of {} transitions -> {}", kept.len(), data.len(), out.display());
        }
        Command::Report { dir } => {
            let rows = report(&dir).map_err(config_error)?;
            println!("strategy,env,runs,final_step,success_mean,success_stderr,coverage_mean,coverage_stderr");
            for r in rows {
                println!(
                    "{},{},{},{},{:.4},{:.4},{:.4},{:.4}",
                    r.strategy,
                    r.env,
                    r.runs,
                    r.final_step,
                    r.success_mean,
                    r.success_stderr,
                    r.coverage_mean,
                    r.coverage_stderr
                );
            }
        }
    }
    Ok(())
}
