//! `crossing-lab`: batch experiment runner for the killed-random-walk
//! laboratory.
//!
//! ```text
//! crossing-lab run <config.toml> [--out DIR] [--workers N]
//! crossing-lab report <DIR>
//! ```
//!
//! Exit codes: 0 success, 1 runtime failure, 2 invalid configuration,
//! 3 module guard violation (enumeration budget, geometry), 4 diagnostics
//! deviating from their expected pass/fail pattern.

mod artifacts;
mod config;
mod report;
mod runner;

use clap::{Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "crossing-lab", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment from a config file and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (default: `<config stem>.out`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker-thread override; recorded in the artifacts.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Summarize artifacts from one or more runs under a directory.
    Report { dir: PathBuf },
}

fn guard_violation(err: &anyhow::Error) -> bool {
    use crossing_core::Error as E;
    matches!(
        err.downcast_ref::<E>(),
        Some(
            E::EnumerationBudget { .. }
                | E::TooFewEnvironments { .. }
                | E::BadGeometry(_)
                | E::InvalidArgument(_)
                | E::BadCubeSide { .. }
                | E::CubeAlignment(_)
        )
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out, workers } => {
            let text = match std::fs::read_to_string(&config) {
                Ok(t) => t,
                Err(e) => {
                    eprintln!("error: cannot read {}: {e}", config.display());
                    return ExitCode::from(2);
                }
            };
            let mut cfg = match config::parse(&text) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(2);
                }
            };
            if let Some(w) = workers {
                if w == 0 {
                    eprintln!("error: --workers must be positive");
                    return ExitCode::from(2);
                }
                cfg.workers = w;
            }
            let out_dir = out.unwrap_or_else(|| {
                let stem = config
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_else(|| "experiment".into());
                PathBuf::from(format!("{stem}.out"))
            });
            let mut dir = match artifacts::ArtifactDir::create(&out_dir) {
                Ok(d) => d,
                Err(e) => {
                    eprintln!("error: {e:#}");
                    return ExitCode::from(1);
                }
            };
            match runner::run(&cfg, &mut dir) {
                Ok(outcome) => {
                    println!(
                        "wrote {} artifacts to {}",
                        dir.written().len(),
                        dir.path().display()
                    );
                    if outcome.ok {
                        ExitCode::SUCCESS
                    } else {
                        eprintln!("diagnostics deviated from the expected pass/fail pattern");
                        ExitCode::from(4)
                    }
                }
                Err(e) => {
                    eprintln!("error: {e:#}");
                    if guard_violation(&e) {
                        ExitCode::from(3)
                    } else {
                        ExitCode::from(1)
                    }
                }
            }
        }
        Command::Report { dir } => match report::emit(&dir) {
            Ok(md) => {
                print!("{md}");
                let path = dir.join("REPORT.md");
                if let Err(e) = std::fs::write(&path, &md) {
                    eprintln!("error: cannot write {}: {e}", path.display());
                    return ExitCode::from(1);
                }
                eprintln!("(also written to {})", path.display());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::from(1)
            }
        },
    }
}
