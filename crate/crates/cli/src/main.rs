use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mlbalancer_core::{compare, run_seeds, Error, ExperimentConfig, StrategyKind};

/// Runs model switching experiments over a synthetic traffic workload and
/// compares their results.
#[derive(Debug, Parser)]
#[command(name = "mlbalancer", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one strategy over the configured trace and write its logs.
    Run {
        /// epsilon-greedy, naive or round-robin-boost
        #[arg(long)]
        strategy: String,
        /// TOML experiment config; built-in defaults when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Workload and planner seed. Repeat to run several seeds in parallel.
        #[arg(long)]
        seed: Vec<u64>,
        /// Override the planner's exploration rate
        #[arg(long)]
        epsilon: Option<f64>,
        /// Output directory
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate completed runs side by side.
    Compare {
        #[arg(required = true, num_args = 1..)]
        run_dirs: Vec<PathBuf>,
        /// Also write the table to this file
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Print the resolved default configuration as TOML.
    PrintConfig {
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn load_config(path: Option<&PathBuf>) -> Result<ExperimentConfig, Error> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Run {
            strategy,
            config,
            seed,
            epsilon,
            out,
        } => {
            let kind: StrategyKind = strategy.parse()?;
            let mut config = load_config(config.as_ref())?;
            if let Some(eps) = epsilon {
                config = config.with_epsilon(eps);
            }
            // Surface config errors before any output directory is touched.
            config.clone().resolve()?;
            if seed.len() <= 1 {
                if let Some(&s) = seed.first() {
                    config = config.with_seed(s);
                }
                let summary = mlbalancer_core::run_experiment(&config, kind, &out)?;
                print!("{}", summary.render());
                println!("\nlogs written to {}", out.display());
            } else {
                for (dir, summary) in run_seeds(&config, kind, &seed, &out)? {
                    print!("{}", summary.render());
                    println!("\nlogs written to {}\n", dir.display());
                }
            }
        }
        Command::Compare { run_dirs, out } => {
            let text = compare(&run_dirs)?.render();
            print!("{text}");
            if let Some(path) = out {
                std::fs::write(&path, &text).map_err(|source| Error::Io { path, source })?;
            }
        }
        Command::PrintConfig { config } => {
            let (resolved, _) = load_config(config.as_ref())?.resolve()?;
            print!("{}", resolved.to_toml()?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
