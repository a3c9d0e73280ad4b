//! Command-line front end.
//!
//! Units are fixed at ħ = m = 1, so `H = -½ d²/dx² + V(x)` and `E = k²/2`.

pub mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use commands::{Context, Fig1Data, Fig1Params, VerifyReport};
pub use config::{Format, RunConfig, Setup};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PROPERTY: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;
pub const EXIT_DEGENERATE: i32 = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CliError {
    #[error("property check failed: {0}")]
    Property(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("solver error: {0}")]
    Solver(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("cannot write output: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Property(_) => EXIT_PROPERTY,
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Solver(_) | CliError::Io(_) => EXIT_SOLVER,
            CliError::Degenerate(_) => EXIT_DEGENERATE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

/// Point interactions in a one-dimensional box.
///
/// Units: ħ = m = 1, H = -½ d²/dx² + V(x), E = k²/2.
/// Exit codes: 0 ok, 1 property failure, 2 config error, 3 solver error,
/// 4 degenerate input.
#[derive(Debug, Parser)]
#[command(name = "pointint", version, about, long_about)]
pub struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Output file or directory.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Seed for randomized checks.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<FormatArg>,
    /// Suppress the summary on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Eigenvalues (and optionally eigenfunctions) of the configured box.
    Spectrum,
    /// The smeared epsilon-train experiment: four states, potential and gaps.
    Fig1 {
        #[arg(long, default_value_t = 5.0)]
        c: f64,
        #[arg(long, default_value_t = 10.0)]
        length: f64,
        #[arg(long, default_value_t = 0.333)]
        a: f64,
        #[arg(long, default_value_t = 0.012)]
        s: f64,
        /// Interior grid points.
        #[arg(long, default_value_t = 8191)]
        n: usize,
    },
    /// Error of a train family against its zero-range limit as a shrinks.
    Converge {
        /// Family as law:params, e.g. epsilon:5, constant:1,1, chi3:-2,1,-1,1.
        #[arg(long)]
        family: String,
        /// Decreasing separations, comma separated.
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        a: Vec<f64>,
        /// eigenvalue:N (1-based, Dirichlet box) or transfer:E.
        #[arg(long)]
        probe: String,
        #[arg(long, default_value_t = 10.0)]
        length: f64,
        /// Energy window lo,hi for eigenvalue probes.
        #[arg(long, value_delimiter = ',', num_args = 1, default_values_t = [0.0, 1.0], allow_hyphen_values = true)]
        window: Vec<f64>,
        #[arg(long, default_value_t = 1e-12)]
        tolerance: f64,
    },
    /// Seeded property checks of the delta-train factorizations.
    Verify {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Fit a connection matrix from the lowest states of the configured box.
    Extract {
        #[arg(long, default_value_t = 4)]
        states: usize,
    },
}

fn require_config(cli: &Cli) -> Result<PathBuf, CliError> {
    cli.config
        .clone()
        .ok_or_else(|| CliError::Config("--config: required for this command".into()))
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let ctx = Context {
        out: cli.out.clone(),
        seed: cli.seed,
        format: cli.format.map(Format::from),
        quiet: cli.quiet,
    };
    match &cli.command {
        Command::Spectrum => commands::cmd_spectrum(&ctx, &require_config(&cli)?).map(drop),
        Command::Fig1 { c, length, a, s, n } => {
            let p = Fig1Params {
                c: *c,
                length: *length,
                a: *a,
                s: *s,
                n: *n,
            };
            commands::cmd_fig1(&ctx, &p).map(drop)
        }
        Command::Converge {
            family,
            a,
            probe,
            length,
            window,
            tolerance,
        } => {
            if window.len() != 2 {
                return Err(CliError::Config("--window: expected lo,hi".into()));
            }
            let args = commands::ConvergeArgs {
                family: family.clone(),
                separations: a.clone(),
                probe: probe.clone(),
                length: *length,
                window: (window[0], window[1]),
                tolerance: *tolerance,
            };
            commands::cmd_converge(&ctx, &args).map(drop)
        }
        Command::Verify { trials } => commands::cmd_verify(&ctx, *trials).map(drop),
        Command::Extract { states } => commands::cmd_extract(&ctx, &require_config(&cli)?, *states).map(drop),
    }
}

/// Parses `args` and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match run(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
