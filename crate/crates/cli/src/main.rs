use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

#[derive(Debug, Parser)]
#[command(name = "qaction", version, about = "Quantum action of anharmonic oscillators at finite temperature")]
pub struct Cli {
    /// Classical action file (`key = value`: dimension, mass, v0, v2, v4, v6 | v22).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Seed for the section seeding generator.
    #[arg(long, global = true, default_value_t = qaction::chaos::DEFAULT_RNG_SEED)]
    pub seed: u64,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct GridArgs {
    /// Grid points per axis (odd).
    #[arg(long)]
    pub grid_points: Option<usize>,
    /// Grid half extent L, grid on [-L, L]^D.
    #[arg(long)]
    pub half_extent: Option<f64>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Spectrum, ground state, radius and amplitude table from the grid oracle.
    Oracle {
        #[command(flatten)]
        grid: GridArgs,
        /// Time extents for the amplitude table.
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        /// Number of eigenvalues written to the spectrum file.
        #[arg(long, default_value_t = 16)]
        states: usize,
    },
    /// Fit the quantum action at one time extent.
    Fit {
        #[command(flatten)]
        grid: GridArgs,
        /// Time extent T = 1/temperature.
        #[arg(long)]
        t: f64,
        /// Amplitude table CSV (sampled from the oracle when absent).
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Fit a list of time extents, each seeded from the previous one.
    Sweep {
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, value_delimiter = ',')]
        times: Option<Vec<f64>>,
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Fit v0(T) = A + B/T + C/T^2 to a sweep.
    Extrapolate {
        /// Sweep CSV (default: <out>/sweep.csv).
        #[arg(long)]
        sweep: Option<PathBuf>,
        /// T window `min,max`.
        #[arg(long, value_delimiter = ',', num_args = 2)]
        window: Option<Vec<f64>>,
    },
    /// Zero-temperature checks: wavefunction comparison, transformation law, closed forms.
    Analytic {
        #[command(flatten)]
        grid: GridArgs,
        /// Quantum action file; fitted inline at `--t` when absent.
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        t: Option<f64>,
        /// Ground-state energy for the closed forms (oracle value when absent).
        #[arg(long)]
        e_gr: Option<f64>,
    },
    /// Poincaré section of the classical (tau = inf) or fitted action.
    Poincare {
        #[command(flatten)]
        section: SectionArgs,
        /// Temperature of the quantum action, or `inf` for the classical one.
        #[arg(long, default_value = "inf")]
        tau: String,
    },
    /// Classical and quantum sections at equal energy and their distance.
    Compare {
        #[command(flatten)]
        section: SectionArgs,
        #[arg(long, default_value = "0.25")]
        tau: String,
        /// Compare against the classical action with seeds shifted by this amount instead.
        #[arg(long)]
        perturb: Option<f64>,
    },
}

#[derive(Debug, Args, Clone)]
pub struct SectionArgs {
    /// Energies (absolute, H = E).
    #[arg(long, value_delimiter = ',', default_value = "10")]
    pub energy: Vec<f64>,
    /// Quantum action file used instead of an inline fit.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long, default_value_t = qaction::chaos::DEFAULT_SEEDS)]
    pub seeds: usize,
    #[arg(long, default_value_t = qaction::chaos::DEFAULT_MAX_CROSSINGS)]
    pub max_crossings: usize,
    #[arg(long)]
    pub max_time: Option<f64>,
}

/// Failure with its exit code and machine-readable kind.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub kind: String,
    pub message: String,
}

impl Failure {
    pub fn usage(kind: &str, message: impl Into<String>) -> Self {
        Self { code: 2, kind: kind.into(), message: message.into() }
    }

    pub fn numerical(kind: &str, message: impl Into<String>) -> Self {
        Self { code: 1, kind: kind.into(), message: message.into() }
    }
}

impl From<qaction::Error> for Failure {
    fn from(e: qaction::Error) -> Self {
        Self { code: if e.is_usage() { 2 } else { 1 }, kind: e.kind().into(), message: e.to_string() }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("warning: thread pool: {e}");
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            let json = serde_json::json!({ "error": f.kind, "message": f.message });
            eprintln!("{json}");
            ExitCode::from(f.code)
        }
    }
}
