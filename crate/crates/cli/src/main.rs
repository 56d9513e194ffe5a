use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;
use sspe_tuner::{cmd_compare, cmd_evaluate, cmd_oracle, cmd_report, cmd_train, CliError, RunConfig};

#[derive(Parser)]
#[command(name = "sspe-tuner", version, about = "Resource tuning for a simulated stream-processing pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Checkpoint to evaluate, or to resume training from.
    #[arg(long, global = true)]
    checkpoint: Option<PathBuf>,
    /// Overrides the config's out_dir.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    Train,
    Evaluate,
    Compare,
    Oracle,
    Report,
}

fn print<T: Serialize>(value: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let path = cli.config.context("--config is required")?;
    let mut cfg = RunConfig::load(&path)?;
    if let Some(out) = cli.out {
        cfg.out_dir = out;
    }
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let checkpoint = || cli.checkpoint.clone().context("--checkpoint is required");
    match cli.command {
        Command::Train => print(&cmd_train(&cfg, cli.checkpoint.as_deref())?),
        Command::Evaluate => print(&cmd_evaluate(&cfg, &checkpoint()?)?),
        Command::Compare => print(&cmd_compare(&cfg, &checkpoint()?)?),
        Command::Oracle => print(&cmd_oracle(&cfg)?),
        Command::Report => {
            let r = cmd_report(&cfg.out_dir, None)?;
            println!("{}", r.dir.display());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SSPE_TUNER_LOG", "warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e.downcast_ref::<CliError>().map_or(2, CliError::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
