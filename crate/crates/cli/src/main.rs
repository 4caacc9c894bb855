//! `penreg --config experiment.json [--out DIR] [--seed N]`
//!
//! Exit codes: 0 when every check passes, 1 when a check fails, 2 on a
//! configuration or runtime error.

mod commands;
mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Result};
use clap::Parser;

use config::Command;
use output::{sha256_hex, Manifest, Seeds, Sink};

#[derive(Debug, Parser)]
#[command(
    name = "penreg",
    version,
    about = "Penalized least-squares experiments"
)]
struct Args {
    /// Experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_dir` in the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Base seed; overrides `seed` in the config.
    #[arg(long)]
    seed: Option<u64>,
}

fn run(args: &Args) -> Result<bool> {
    let start = Instant::now();
    let mut cfg = config::load(&args.config)?;
    // Hash the document as written; overrides are recorded separately.
    let config_sha256 = sha256_hex(&cfg.canonical_json());
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    // Paths in the config are relative to the config file, `--out` to the
    // working directory.
    let base_dir = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_default();
    let out = match (&args.out, &cfg.output_dir) {
        (Some(out), _) => out.clone(),
        (None, Some(dir)) => base_dir.join(dir),
        (None, None) => {
            bail!("field `output_dir`: missing (set it in the config or pass --out)")
        }
    };
    let mut sink = Sink::new(&out)?;
    let outcome = match cfg.command {
        Command::Solve => commands::solve_cmd(&cfg, &base_dir, &mut sink)?,
        Command::VerifyGeometry => commands::geometry_cmd(&cfg, &base_dir, &mut sink)?,
        Command::Constants => commands::constants_cmd(&cfg, &base_dir, &mut sink)?,
        Command::Simulate => commands::simulate_cmd(&cfg, &base_dir, &mut sink)?,
        Command::Report => {
            let input = match &cfg.report_dir {
                Some(dir) => base_dir.join(dir),
                None => out.clone(),
            };
            commands::report_cmd(&input, &mut sink)?
        }
    };
    let manifest = Manifest {
        command: cfg.command.to_string(),
        config_sha256,
        version: env!("CARGO_PKG_VERSION").to_string(),
        seeds: Seeds {
            base: cfg.seed,
            design: outcome.design_seed,
        },
        wall_time_seconds: start.elapsed().as_secs_f64(),
        exit_code: if outcome.pass { 0 } else { 1 },
        files: sink.written().to_vec(),
    };
    sink.json("manifest.json", &manifest)?;
    println!(
        "{}: {} (artifacts in {})",
        cfg.command,
        if outcome.pass { "pass" } else { "FAIL" },
        sink.dir().display()
    );
    Ok(outcome.pass)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match run(&args) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
