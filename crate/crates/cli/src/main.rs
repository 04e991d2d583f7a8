use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use reciprocity::oracle::value_iteration_averaged;
use reciprocity_cli::{compare, run, ExperimentConfig};

#[derive(Parser)]
#[command(name = "reciprocity", version, about = "Run and compare policy reciprocity experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of a config and write metrics.
    Run { config: PathBuf },
    /// Compare two tabular run directories seed by seed.
    Compare { run_a: PathBuf, run_b: PathBuf },
    /// Solve the averaged Bellman equation of a config's environment.
    Oracle {
        config: PathBuf,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        /// Write JSON here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
}

fn dispatch(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::Run { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            let out = run(&cfg)?;
            println!("{} seeds written to {}", out.seeds.len(), out.dir.display());
        }
        Command::Compare { run_a, run_b } => print!("{}", compare(&run_a, &run_b)?),
        Command::Oracle { config, tol, out } => {
            let cfg = ExperimentConfig::load(&config)?;
            let Some(pr) = &cfg.pr else {
                bail!(reciprocity::Error::config("pr", "oracle needs pr.gamma"));
            };
            let env = cfg.env.build::<f64>()?;
            let Some(model) = env.model() else {
                bail!(reciprocity::Error::config("env.kind", "environment has no explicit model"));
            };
            let q = value_iteration_averaged(model, pr.gamma, tol)?;
            let json = serde_json::to_string_pretty(&q)?;
            match out {
                Some(path) => std::fs::write(&path, json).with_context(|| format!("writing {}", path.display()))?,
                None => println!("{json}"),
            }
        }
        Command::Validate { config } => {
            ExperimentConfig::load(&config)?;
            println!("ok");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let config_error = e
                .chain()
                .any(|c| matches!(c.downcast_ref::<reciprocity::Error>(), Some(reciprocity::Error::Config { .. })));
            ExitCode::from(if config_error { 2 } else { 1 })
        }
    }
}
