//! `spn`: validate, generate, simulate, certify and analyze stochastic
//! processing networks.

mod commands;
mod report;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use report::Format;

pub const EXIT_VIOLATED: u8 = 2;
pub const EXIT_INPUT: u8 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("error[{code}]: {message}")]
    Input { code: String, message: String },
    #[error("{0}")]
    Violated(String),
    #[error("error[cli::Io]: {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl CliError {
    pub fn input(code: impl Into<String>, message: impl Into<String>) -> Self {
        CliError::Input { code: code.into(), message: message.into() }
    }

    pub fn io(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::Io { path: path.to_path_buf(), message: e.to_string() }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Violated(_) => EXIT_VIOLATED,
            CliError::Input { .. } | CliError::Io { .. } => EXIT_INPUT,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "spn", version, about = "Stochastic processing network toolkit")]
pub struct Cli {
    /// Seed of every random stream (required by simulate and drift).
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory [default: $SPN_OUT_DIR, else spn-out].
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Table format for trajectories and bins.
    #[arg(long, global = true, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Clone)]
#[group(required = true, multiple = false)]
pub struct Source {
    /// Network specification file.
    #[arg(long)]
    pub spec: Option<PathBuf>,
    /// Builtin example name.
    #[arg(long)]
    pub example: Option<String>,
}

#[derive(Debug, Args, Clone)]
pub struct NetworkArgs {
    #[command(flatten)]
    pub source: Source,
    /// Priority-instability parameters for the builtin rybko-stolyar.
    #[arg(long)]
    pub unstable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PolicyName {
    Lrfs,
    EpsLrfs,
    StaticPriority,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TieBreakName {
    Lowest,
    Random,
}

#[derive(Debug, Args, Clone)]
pub struct PolicyArgs {
    #[arg(long, value_enum, default_value_t = PolicyName::Lrfs)]
    pub policy: PolicyName,
    /// Coin probability of eps-lrfs [default: half the constructed slack
    /// bound].
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Buffers from highest to lowest priority, one-based
    /// [default: fewest expected remaining visits first].
    #[arg(long, value_delimiter = ',')]
    pub priority_order: Option<Vec<usize>>,
    #[arg(long, value_enum, default_value_t = TieBreakName::Lowest)]
    pub tiebreak: TieBreakName,
}

#[derive(Debug, Args, Clone)]
pub struct RunArgs {
    #[arg(long, default_value_t = 1e4)]
    pub horizon: f64,
    #[arg(long, default_value_t = 1)]
    pub replications: usize,
    /// Initial waiting jobs as BUFFER:COUNTER:COUNT (one-based buffer).
    #[arg(long = "initial")]
    pub initial: Vec<String>,
    /// Check every event against the model invariants.
    #[arg(long)]
    pub audit: bool,
    /// Exit with status 2 when the verdict is not stable.
    #[arg(long)]
    pub expect_stable: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check a network specification.
    Validate(NetworkArgs),
    /// Write a builtin example as a specification file.
    Example {
        name: String,
        #[arg(long)]
        unstable: bool,
    },
    /// Simulate and write sampled trajectories with a stability summary.
    Simulate {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        run: RunArgs,
        #[arg(long, default_value_t = 1.0)]
        interval: f64,
        /// Route pre-draw depth (0: plain process).
        #[arg(long, default_value_t = 0)]
        predraw_depth: usize,
    },
    /// Check a quadratic local Lyapunov certificate.
    Certify {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        z: CertArgs,
        /// Certificate slack [default: half the constructed bound, else 0].
        #[arg(long)]
        epsilon: Option<f64>,
        /// Also report the largest slack for which the check holds.
        #[arg(long)]
        max_slack: bool,
        /// Structural condition to evaluate: C1, C2, C2p, C3 or C3p.
        #[arg(long)]
        condition: Vec<String>,
        /// Monte Carlo samples of the independent drift check.
        #[arg(long, default_value_t = 0)]
        samples: u64,
    },
    /// Estimate the drift of the global Lyapunov function.
    Drift {
        #[command(flatten)]
        net: NetworkArgs,
        #[command(flatten)]
        policy: PolicyArgs,
        #[command(flatten)]
        z: CertArgs,
        #[command(flatten)]
        run: RunArgs,
        /// Certificate slack [default: 0 when routes are bounded, else half
        /// the constructed bound].
        #[arg(long)]
        cert_epsilon: Option<f64>,
        /// Also write every trajectory with its Lglo column.
        #[arg(long)]
        trajectories: bool,
    },
    /// Stability (and drift, with an Lglo column) of trajectory tables.
    Analyze {
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, default_value_t = spn_core::diagnostics::DEFAULT_SLOPE_THRESHOLD)]
        slope_threshold: f64,
        #[arg(long)]
        expect_stable: bool,
    },
}

#[derive(Debug, Args, Clone)]
pub struct CertArgs {
    /// Z matrix file; constructed from the network when absent.
    #[arg(long)]
    pub z: Option<PathBuf>,
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out
        .clone()
        .or_else(|| std::env::var_os("SPN_OUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("spn-out"))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(EXIT_INPUT) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli, &out_dir(&cli)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code())
        }
    }
}
