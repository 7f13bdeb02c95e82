use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cer_core::agent::Algorithm;
use cer_core::harness::{plotdata, run_experiment, ExperimentConfig, HarnessError};

/// Replay-buffer experiments on the waypoint gridworld.
#[derive(Debug, Parser)]
#[command(name = "cerlab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train every algorithm on every seed and write CSVs plus a manifest.
    Run {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        experiment: u8,
        /// Comma-separated subset of dqn, per, cer, cer-nocontrast.
        #[arg(long, value_delimiter = ',')]
        algorithms: Option<Vec<Algorithm>>,
        /// Comma-separated seed list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// TOML file overriding any default.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Maximum number of concurrent runs.
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Print the best achievable return of the experiment's grid.
    Oracle {
        #[arg(long, value_parser = clap::value_parser!(u8).range(1..=5))]
        experiment: u8,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Turn a results directory into gnuplot-ready .dat files.
    Plotdata {
        #[arg(long = "in")]
        input: PathBuf,
        /// Defaults to the input directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 1 } else { 2 })
        }
    }
}

fn execute(command: Command) -> Result<ExitCode, HarnessError> {
    match command {
        Command::Run { experiment, algorithms, seeds, episodes, out, config, jobs } => {
            let mut cfg = ExperimentConfig::load(experiment, config.as_deref())?;
            if let Some(v) = algorithms {
                cfg.algorithms = v;
            }
            if let Some(v) = seeds {
                cfg.seeds = v;
            }
            if let Some(v) = episodes {
                cfg.agent.episodes = v;
            }
            if let Some(v) = out {
                cfg.out_dir = v;
            }
            if let Some(v) = jobs {
                cfg.jobs = v;
            }
            cfg.validate()?;
            let results = run_experiment(&cfg)?;
            for run in &results.runs {
                match &run.outcome {
                    Ok((_, smoothed)) => println!(
                        "{:<15} seed {:<4} final smoothed return {:.3}",
                        run.algorithm.name(),
                        run.seed,
                        smoothed.last().copied().unwrap_or(f64::NAN)
                    ),
                    Err(e) => eprintln!("{} seed {} failed: {e}", run.algorithm.name(), run.seed),
                }
            }
            println!("optimum {:.2}; results in {}", results.oracle_optimum, cfg.out_dir.display());
            Ok(if results.failures() > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS })
        }
        Command::Oracle { experiment, config } => {
            let cfg = ExperimentConfig::load(experiment, config.as_deref())?;
            println!("{:.2}", cfg.oracle()?);
            Ok(ExitCode::SUCCESS)
        }
        Command::Plotdata { input, out } => {
            let out = out.unwrap_or_else(|| input.clone());
            for path in plotdata(&input, &out)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
