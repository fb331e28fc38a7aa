//! `wpk`: scenario-driven experiments on one-dimensional Schrödinger evolutions.

mod commands;
mod error;
mod scenario;
mod verify;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::commands::{FieldKind, GenOptions};
use crate::error::{CliError, Result};
use crate::scenario::Scenario;
use crate::verify::Suite;

#[derive(Debug, Parser)]
#[command(name = "wpk", version, about = "Wavepacket and concentration experiments for 1D Schrödinger evolutions")]
struct Cli {
    /// Scenario file (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output directory, overriding `[output] dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed for corpus generation.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evolve a WPK1 field and export slices, masses and mixed norms.
    Evolve {
        input: PathBuf,
        /// Final time (default δ₀; may be negative).
        #[arg(long, allow_negative_numbers = true)]
        t1: Option<f64>,
    },
    /// Find the most correlated packet over scales, times and phase space.
    Detect {
        input: PathBuf,
        #[arg(long)]
        max_evals: Option<usize>,
    },
    /// Iterated profile extraction with a mass ledger.
    Decompose {
        input: PathBuf,
        #[arg(long, default_value_t = 4)]
        max_bubbles: usize,
    },
    /// Locate the interval carrying a large share of the Strichartz norm.
    Hls {
        input: PathBuf,
        #[arg(long, default_value_t = 8.0)]
        q: f64,
        /// Spatial exponent (default: the admissible r for q).
        #[arg(long)]
        r: Option<f64>,
    },
    /// Evaluate the four-packet kernel for a CSV of quadruples.
    Kernel { quadruples: PathBuf },
    /// Run invariant suites and print TAP.
    Verify {
        #[arg(value_enum, default_value_t = Suite::All)]
        suite: Suite,
    },
    /// Write test fields on the scenario grid.
    Gen {
        #[arg(value_enum)]
        kind: FieldKind,
        #[arg(long)]
        output: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        x0: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        xi0: f64,
        /// Chirp rate.
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        a: f64,
        #[arg(long, default_value_t = 30)]
        count: usize,
    },
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size the worker pool: {e}")))?;
    }
    let mut sc = match &cli.config {
        Some(path) => Scenario::load(path)?,
        None => Scenario::default(),
    };
    if let Some(dir) = cli.out {
        sc.output.dir = dir;
    }
    match cli.command {
        Command::Evolve { input, t1 } => commands::evolve(&sc, &input, t1),
        Command::Detect { input, max_evals } => commands::detect(&sc, &input, max_evals),
        Command::Decompose { input, max_bubbles } => {
            if max_bubbles == 0 {
                return Err(CliError::Config("--max-bubbles must be at least 1".into()));
            }
            commands::decompose(&sc, &input, max_bubbles)
        }
        Command::Hls { input, q, r } => commands::hls(&sc, &input, q, r),
        Command::Kernel { quadruples } => commands::kernel(&sc, &quadruples),
        Command::Verify { suite } => verify::run(&sc, suite, std::io::stdout().lock()),
        Command::Gen { kind, output, lambda, x0, xi0, a, count } => {
            commands::generate(&sc, kind, output.as_deref(), GenOptions { lambda, x0, xi0, a, count }, cli.seed)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("wpk: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
