//! `kirchhoff`: command-line driver for simulations and long-time probes.
//!
//! Exit codes: 0 success, 2 assumption gate refused (or `check` failed),
//! 3 numerical failure, 4 malformed configuration, 1 anything else.

mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

/// Environment variable naming the default output directory.
pub const OUTPUT_DIR_ENV: &str = "KIRCHHOFF_OUTPUT_DIR";

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Core(kirchhoff::Error),
    Io(std::io::Error),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            CliError::Core(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "i/o error: {e}"),
        }
    }
}

impl From<kirchhoff::Error> for CliError {
    fn from(e: kirchhoff::Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(kirchhoff::Error::Json(e))
    }
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        use kirchhoff::Error as E;
        match self {
            CliError::Config(_) => 4,
            CliError::Core(E::Refused { .. }) => 2,
            CliError::Core(E::NewtonFailure { .. } | E::SingularJacobian { .. }) => 3,
            CliError::Core(E::Domain(_) | E::Config(_)) => 4,
            CliError::Core(_) | CliError::Io(_) => 1,
        }
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "kirchhoff",
    version,
    about = "Simulate and probe Kirchhoff wave equations with nonlocal strong damping"
)]
struct Cli {
    /// Output directory. Overrides `run.output_dir` and $KIRCHHOFF_OUTPUT_DIR.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evaluate the structural hypotheses on the coefficients.
    Check { config: PathBuf },
    /// Integrate the initial data to `run.horizon`.
    Simulate { config: PathBuf },
    /// Solve for equilibria from the configured guesses.
    Equilibria { config: PathBuf },
    /// Run one long-time probe.
    Probe { kind: ProbeKind, config: PathBuf },
    /// Compare the spectral solution with the finite-difference reference.
    OracleCompare { config: PathBuf },
    /// Repeat `simulate` over one parameter axis.
    Sweep {
        config: PathBuf,
        /// Dotted key path, e.g. stepper.dt. Overrides `sweep.parameter`.
        #[arg(long)]
        param: Option<String>,
        /// Comma-separated TOML values. Overrides `sweep.values`.
        #[arg(long, value_delimiter = ',')]
        values: Vec<String>,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum ProbeKind {
    Absorbing,
    Splitting,
    Quasistab,
    Determining,
    Dimension,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Check { config } => commands::check(&config, cli.out.as_deref()),
        Command::Simulate { config } => commands::simulate(&config, cli.out.as_deref()),
        Command::Equilibria { config } => commands::equilibria(&config, cli.out.as_deref()),
        Command::Probe { kind, config } => commands::probe(kind, &config, cli.out.as_deref()),
        Command::OracleCompare { config } => commands::oracle_compare(&config, cli.out.as_deref()),
        Command::Sweep {
            config,
            param,
            values,
        } => commands::sweep(&config, param, values, cli.out.as_deref()),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            if let CliError::Core(kirchhoff::Error::Refused { report, .. }) = &e {
                if let Ok(json) = serde_json::to_string_pretty(report) {
                    eprintln!("{json}");
                }
            }
            ExitCode::from(e.exit_code())
        }
    }
}
