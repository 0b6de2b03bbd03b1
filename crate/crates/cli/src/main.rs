use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod config;
mod run;

/// Batch runs of monodromy, isomonodromic flow, kernel detection and the
/// torus example. Writes `<prefix>.report.json` and, for scans,
/// `<prefix>.scan.csv`.
///
/// Exit status: 0 on success, 1 on numerical failure (the report records
/// the error), 2 on configuration errors (no files are written).
#[derive(Debug, Parser)]
#[command(name = "isofol", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Monodromy tuple of a Fuchsian system at a basepoint.
    Monodromy(RunArgs),
    /// Flow residues along a pole motion and measure the monodromy drift.
    Schlesinger(RunArgs),
    /// Framed or class kernels and a rank scan of a parameter family.
    Detect(RunArgs),
    /// Closed form vs detector on a torus foliation.
    TorusCheck(RunArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Framed,
    Class,
}

#[derive(Debug, Clone, Args)]
pub struct RunArgs {
    /// JSON configuration file.
    #[arg(long)]
    pub input: PathBuf,
    /// Output path prefix.
    #[arg(long)]
    pub out_prefix: PathBuf,
    /// Relative tolerance of the continuation, in [1e-14, 1e-4].
    #[arg(long, default_value_t = 1e-10, value_parser = rel_tol)]
    pub rel_tol: f64,
    /// Finite-difference step, in [1e-9, 1e-2].
    #[arg(long, default_value_t = 1e-5, value_parser = fd_step)]
    pub fd_step: f64,
    /// Relative singular-value cutoff, in (0, 1).
    #[arg(long, default_value_t = 1e-6, value_parser = rank_eps)]
    pub rank_eps: f64,
    /// Number of seeded random samples added to a scan.
    #[arg(long, default_value_t = 0)]
    pub samples: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = Mode::Framed)]
    pub mode: Mode,
}

fn ranged(s: &str, lo: f64, hi: f64, open: bool) -> Result<f64, String> {
    let x: f64 = s.parse().map_err(|e| format!("{e}"))?;
    let inside = if open { x > lo && x < hi } else { x >= lo && x <= hi };
    if inside {
        Ok(x)
    } else if open {
        Err(format!("{x:e} outside ({lo:e}, {hi:e})"))
    } else {
        Err(format!("{x:e} outside [{lo:e}, {hi:e}]"))
    }
}

fn rel_tol(s: &str) -> Result<f64, String> {
    ranged(s, 1e-14, 1e-4, false)
}

fn fd_step(s: &str) -> Result<f64, String> {
    ranged(s, 1e-9, 1e-2, false)
}

fn rank_eps(s: &str) -> Result<f64, String> {
    ranged(s, 0.0, 1.0, true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (name, args) = match &cli.command {
        Command::Monodromy(a) => ("monodromy", a),
        Command::Schlesinger(a) => ("schlesinger", a),
        Command::Detect(a) => ("detect", a),
        Command::TorusCheck(a) => ("torus-check", a),
    };
    match run::execute(name, args) {
        Ok(outcome) => {
            if let Err(e) = run::write_outputs(&args.out_prefix, &outcome) {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
            match &outcome.report.error {
                None => ExitCode::SUCCESS,
                Some(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Err(e) => {
            eprintln!("configuration error: {e}");
            ExitCode::from(2)
        }
    }
}
