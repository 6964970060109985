//! `fip`: run weight-space path experiments from JSON configs.
//!
//! Every subcommand takes `--config <file>` plus optional `--out` and
//! `--seed` overrides, exits 0 on success with a one-line JSON summary on
//! stdout, and exits 1 with a machine-readable error JSON on stderr
//! otherwise.

use clap::{Args, Parser, Subcommand};
use fip_core::{run_experiment, ExperimentConfig, ExperimentKind, FipError};
use serde_json::json;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "fip", version, about = "Functionally invariant paths in weight space")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    /// Override the config's output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Sequential-task learning: path adaptation vs naive fine-tuning.
    Continual(RunArgs),
    /// Sparsity sweep with hard projection at each target.
    Sparsify(RunArgs),
    /// Path ensemble under a surrogate PGD attack.
    Ensemble(RunArgs),
    /// Adapt/compress operators applied in both orders.
    Compose(RunArgs),
    /// Eigenvalue report of the weight-space metric.
    Spectrum(RunArgs),
}

impl Command {
    fn kind(&self) -> ExperimentKind {
        match self {
            Command::Continual(_) => ExperimentKind::Continual,
            Command::Sparsify(_) => ExperimentKind::Sparsify,
            Command::Ensemble(_) => ExperimentKind::Ensemble,
            Command::Compose(_) => ExperimentKind::Compose,
            Command::Spectrum(_) => ExperimentKind::Spectrum,
        }
    }

    fn args(&self) -> &RunArgs {
        match self {
            Command::Continual(a)
            | Command::Sparsify(a)
            | Command::Ensemble(a)
            | Command::Compose(a)
            | Command::Spectrum(a) => a,
        }
    }
}

fn run(command: &Command) -> Result<serde_json::Value, FipError> {
    let args = command.args();
    let mut config = ExperimentConfig::load(&args.config)?;
    if config.kind != command.kind() {
        return Err(FipError::InvalidConfig(format!(
            "config kind '{}' does not match the '{}' subcommand",
            config.kind.name(),
            command.kind().name()
        )));
    }
    if let Some(out) = &args.out {
        config.out_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    let log = run_experiment(&config)?;
    Ok(json!({
        "run_id": log.run_id(),
        "records": log.records().len(),
        "out_dir": config.out_dir,
        "runlog": log.path(),
    }))
}

fn main() {
    let cli = Cli::parse();
    match run(&cli.command) {
        Ok(summary) => {
            println!("{summary}");
        }
        Err(err) => {
            let payload = json!({
                "error": { "kind": err.kind(), "message": err.to_string() }
            });
            eprintln!("{payload}");
            std::process::exit(1);
        }
    }
}
