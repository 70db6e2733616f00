//! `aqec`: runs approximate-QEC experiments described by a JSON config.

mod config;
mod error;
mod experiments;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use crate::config::{diagnose, load, Level};
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "aqec", version, about = "Approximate quantum error correction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write CSV plus a .meta.json sidecar.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Check a config without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Replace master_seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Replace output_path.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Replace limits.max_dim.
    #[arg(long)]
    max_dim: Option<usize>,
}

fn prepare(path: &PathBuf, ov: &Overrides) -> Result<(config::Loaded, Vec<config::Diagnostic>), CliError> {
    let mut loaded = load(path)?;
    let cfg = &mut loaded.config;
    if let Some(s) = ov.seed {
        cfg.master_seed = s;
    }
    if let Some(o) = &ov.out {
        cfg.output_path = Some(o.clone());
    }
    if let Some(d) = ov.max_dim {
        cfg.limits.get_or_insert_with(Default::default).max_dim = Some(d);
    }
    let diags = diagnose(cfg, &loaded.text, &loaded.base_dir, &cfg.limits());
    Ok((loaded, diags))
}

fn run(path: &PathBuf, ov: &Overrides) -> Result<(), CliError> {
    let (loaded, diags) = prepare(path, ov)?;
    let (errors, warnings): (Vec<_>, Vec<_>) = diags.into_iter().partition(|d| d.level == Level::Error);
    for w in &warnings {
        eprintln!("{w}");
    }
    if !errors.is_empty() {
        return Err(CliError::Invalid(errors));
    }
    let cfg = &loaded.config;
    let out = cfg
        .output_path
        .clone()
        .ok_or_else(|| CliError::config("no output path", None))?;
    let start = Instant::now();
    let ctx = experiments::Context {
        config: cfg,
        base_dir: &loaded.base_dir,
        limits: cfg.limits(),
    };
    let table = experiments::run(&ctx)?;
    output::emit(&table, cfg, &out, start.elapsed().as_millis())?;
    println!("{}: wrote {} rows to {}", cfg.experiment.name(), table.rows.len(), out.display());
    Ok(())
}

/// Prints diagnostics; fails only when at least one is an error.
fn validate(path: &PathBuf, ov: &Overrides) -> Result<(), CliError> {
    let (_, diags) = prepare(path, ov)?;
    for d in &diags {
        println!("{d}");
    }
    if diags.iter().any(|d| d.level == Level::Error) {
        return Err(CliError::Invalid(Vec::new()));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run { config, overrides } => run(config, overrides),
        Command::Validate { config, overrides } => validate(config, overrides),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Invalid(d)) if d.is_empty() => ExitCode::from(2),
        Err(e) => {
            eprintln!("aqec: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
