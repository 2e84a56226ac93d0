//! `fsstokes`: root loci, calibration, resolvent samples, evolution, decay fits
//! and the verification harness from one JSON configuration.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use crate::commands::{Context, Failure, VerifyArgs};
use crate::config::{parse_config, RunConfig};
use crate::manifest::{Manifest, Status};

/// Overrides the output directory of the configuration.
const OUTPUT_DIR_ENV: &str = "FSSTOKES_OUTPUT_DIR";

#[derive(Parser, Debug)]
#[command(name = "fsstokes", version, about = "Free-surface Stokes spectral laboratory")]
struct Cli {
    /// JSON run configuration; omitted keys take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides FSSTOKES_OUTPUT_DIR and the configuration).
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    /// Worker threads (overrides the configuration).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Root locus of the Lopatinskii determinant over a log grid of A.
    Roots,
    /// Calibrate A0 and the contour constants.
    Calibrate,
    /// Resolvent solution at one (xi', lambda).
    Resolvent,
    /// Evolve the initial data and dump snapshots.
    Evolve,
    /// Measure a decay series and compare with its theoretical exponent.
    DecayFit,
    /// Run the verification checks.
    Verify {
        /// Check id or name (repeatable); all checks when absent.
        #[arg(long = "check")]
        checks: Vec<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Fail when empirical constants drift more than 20% from this baseline.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Write the empirical constants of this run as a baseline.
        #[arg(long)]
        write_baseline: Option<PathBuf>,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Roots => "roots",
            Command::Calibrate => "calibrate",
            Command::Resolvent => "resolvent",
            Command::Evolve => "evolve",
            Command::DecayFit => "decay-fit",
            Command::Verify { .. } => "verify",
        }
    }
}

fn output_dir(cli: &Cli, cfg: Option<&RunConfig>) -> PathBuf {
    cli.output_dir
        .clone()
        .or_else(|| std::env::var_os(OUTPUT_DIR_ENV).map(PathBuf::from))
        .or_else(|| cfg.map(|c| c.output_dir.clone()))
        .unwrap_or_else(|| RunConfig::default().output_dir)
}

fn run(cli: &Cli, manifest: &mut Manifest) -> Result<Status, Failure> {
    let mut cfg = match &cli.config {
        Some(path) => {
            manifest.config_source = Some(path.display().to_string());
            parse_config(path).map_err(|e| Failure::usage("config", e))?
        }
        None => RunConfig::default(),
    };
    cfg.output_dir = output_dir(cli, Some(&cfg));
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Failure::usage("config", "workers: worker count must be positive"));
        }
        cfg.workers = Some(w);
    }
    manifest.set_config(&cfg);
    if let Some(w) = cfg.workers {
        rayon::ThreadPoolBuilder::new().num_threads(w).build_global().map_err(|e| Failure::usage("workers", e))?;
    }
    manifest.workers = rayon::current_num_threads();
    let out = cfg.output_dir.clone();
    let mut ctx = Context { cfg: &cfg, out: &out, manifest };
    match &cli.command {
        Command::Roots => commands::roots(&mut ctx),
        Command::Calibrate => commands::calibrate(&mut ctx),
        Command::Resolvent => commands::resolvent(&mut ctx),
        Command::Evolve => commands::evolve(&mut ctx),
        Command::DecayFit => commands::decay_fit(&mut ctx),
        Command::Verify { checks, seed, baseline, write_baseline } => {
            let args = VerifyArgs { checks: checks.clone(), seed: *seed, baseline: baseline.clone(), write_baseline: write_baseline.clone() };
            commands::verify(&mut ctx, &args)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let mut manifest = Manifest::new(cli.command.name());
    let status = match run(&cli, &mut manifest) {
        Ok(s) => s,
        Err(f) => {
            eprintln!("fsstokes {}: {} failed: {}", cli.command.name(), f.stage, f.message);
            manifest.failure_stage = Some(f.stage.to_string());
            manifest.error = Some(f.message);
            f.status
        }
    };
    manifest.status = status;
    manifest.exit_code = status.code();
    manifest.wall_time_s = start.elapsed().as_secs_f64();
    let dir = manifest.config.as_ref().map_or_else(|| output_dir(&cli, None), |c| c.output_dir.clone());
    if let Err(e) = manifest.write(&dir) {
        eprintln!("fsstokes: cannot write manifest to {}: {e}", dir.display());
    }
    ExitCode::from(status.code())
}
