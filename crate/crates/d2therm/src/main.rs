use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use d2therm::checkpoint;
use d2therm::config::{load_config, ResolvedRun};
use d2therm::ensemble::{resume_ensemble, run_ensemble, EnsembleOptions};
use d2therm::output::{format_trajectory, write_bundle};
use d2therm::SimError;
use d2therm_core::TrajectoryRecord;

/// Thermalized Davydov D2 ensemble simulator.
#[derive(Parser, Debug)]
#[command(name = "d2therm", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an ensemble and write the CSV bundle.
    Run {
        /// JSON configuration (a manifest.json from an earlier run also works).
        #[arg(long)]
        config: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        /// Override a configuration value, e.g. `run.trajectories=10`.
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
        /// Worker threads.
        #[arg(long, env = "D2THERM_THREADS")]
        threads: Option<usize>,
        /// Write every trajectory to `<out>/trajectories/`.
        #[arg(long)]
        dump_trajectories: bool,
        /// Save the running accumulator here as the ensemble progresses.
        #[arg(long, value_name = "FILE")]
        checkpoint: Option<PathBuf>,
        /// Continue from the file given by --checkpoint when it exists.
        #[arg(long, requires = "checkpoint")]
        resume: bool,
    },
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
}

const EXIT_CONFIG: u8 = 3;
const EXIT_RUNTIME: u8 = 4;
const EXIT_IO: u8 = 5;

fn exit_code(e: &SimError) -> u8 {
    match e {
        SimError::Read { .. } | SimError::Parse(_) | SimError::Config { .. } => EXIT_CONFIG,
        SimError::Core(_) | SimError::TooManyFailures { .. } => EXIT_RUNTIME,
        SimError::Io(_) | SimError::Checkpoint(_) => EXIT_IO,
    }
}

fn resolve(config: &Path, overrides: &[String]) -> Result<ResolvedRun, SimError> {
    let run = ResolvedRun::new(load_config(config, overrides)?)?;
    for w in run.warnings() {
        eprintln!("warning: {w}");
    }
    Ok(run)
}

#[allow(clippy::too_many_arguments)]
fn cmd_run(
    config: &Path,
    out: &Path,
    overrides: &[String],
    threads: Option<usize>,
    dump: bool,
    checkpoint_path: Option<&Path>,
    resume: bool,
) -> Result<(), SimError> {
    let run = resolve(config, overrides)?;
    std::fs::create_dir_all(out)?;
    let times = run.run.snapshot_times();
    let dump_dir = out.join("trajectories");
    if dump {
        std::fs::create_dir_all(&dump_dir)?;
    }
    let dump_hook = |rec: &TrajectoryRecord| {
        let path = dump_dir.join(format!("traj_{:06}.csv", rec.index));
        if let Err(e) = std::fs::write(&path, format_trajectory(rec, &times)) {
            eprintln!("warning: cannot write {}: {e}", path.display());
        }
    };
    let fp = checkpoint::fingerprint(&run.config);
    let save_hook = |acc: &d2therm_core::EnsembleAccumulator| match checkpoint_path {
        Some(p) => checkpoint::save(p, acc, fp),
        None => Ok(()),
    };
    let options = EnsembleOptions {
        threads,
        on_record: if dump { Some(&dump_hook) } else { None },
        on_progress: Some(&save_hook),
    };
    let result = match checkpoint_path {
        Some(p) if resume && p.exists() => {
            let acc = checkpoint::load(p, fp)?;
            eprintln!(
                "resuming from {} with {} trajectories done",
                p.display(),
                acc.n_trajectories as usize + acc.failures.len()
            );
            resume_ensemble(&run.run, acc, &options)?
        }
        _ => run_ensemble(&run.run, &options)?,
    };
    for f in result.failures() {
        eprintln!("warning: {f}");
    }
    write_bundle(out, &run, &result)?;
    eprintln!(
        "{} trajectories ({} failed) written to {}",
        result.n_trajectories(),
        result.failures().len(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Run {
            config,
            out,
            overrides,
            threads,
            dump_trajectories,
            checkpoint,
            resume,
        } => cmd_run(
            config,
            out,
            overrides,
            *threads,
            *dump_trajectories,
            checkpoint.as_deref(),
            *resume,
        ),
        Command::Validate { config, overrides } => resolve(config, overrides).map(|r| {
            println!(
                "ok: {} sites, {} modes per site, {} trajectories, {} snapshots",
                r.run.model.n_sites(),
                r.run.bath.n_modes(),
                r.run.n_trajectories,
                r.run.n_snapshots()
            );
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
