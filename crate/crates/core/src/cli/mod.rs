//! Command-line front end.
//!
//! Errors print one line `error[<code>]: <message>` on stderr. Exit codes:
//! 0 success, 2 input error, 3 numeric failure, 4 suite failure.

mod commands;
mod output;
mod source;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::classifier::ClassifyConfig;
use crate::synthesis::{CanonicalKind, OdeKind, DEFAULT_ODE_TOL, DEFAULT_STEP};

pub use output::{csv_float, validate_projection};

pub const LOG_ENV: &str = "GAWK_CURVES_LOG";
pub const DEFAULT_SAMPLES: usize = 256;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: &'static str,
    pub exit: u8,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> CliError {
        CliError { code: "input", exit: 2, message: message.into() }
    }

    pub fn parse(message: impl Into<String>) -> CliError {
        CliError { code: "parse", exit: 2, message: message.into() }
    }

    pub fn io(message: impl Into<String>) -> CliError {
        CliError { code: "io", exit: 2, message: message.into() }
    }

    pub fn numeric(message: impl Into<String>) -> CliError {
        CliError { code: "numeric", exit: 3, message: message.into() }
    }

    pub fn ode(message: impl Into<String>) -> CliError {
        CliError { code: "ode", exit: 3, message: message.into() }
    }

    pub fn suite(message: impl Into<String>) -> CliError {
        CliError { code: "suite", exit: 4, message: message.into() }
    }

    /// The single diagnostic line.
    pub fn line(&self) -> String {
        let msg = self.message.replace('\n', " ");
        format!("error[{}]: {}", self.code, msg.trim())
    }
}

#[derive(Debug, Parser)]
#[command(name = "gawk-curves", version, about = "Frenet apparatus and generalized AW(k)-type classification of curves")]
pub struct Cli {
    /// Worker threads for per-sample work (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Per-sample Frenet table: curvatures, their derivatives, λ, μ and ‖N_k‖.
    Analyze(AnalyzeArgs),
    /// JSON report of the seven type verdicts.
    Classify(ClassifyArgs),
    /// Integrates a curvature profile into a sampled curve.
    Synthesize(SynthesizeArgs),
    /// Solves one of the characterizing curvature ODEs.
    SolveOde(SolveOdeArgs),
    /// Runs the proposition suite.
    Verify(VerifyArgs),
    /// Coordinate projections of a curve as CSV, optionally as SVG.
    Plotdata(PlotdataArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// Exactly one curve or profile source.
#[derive(Debug, Clone, Args)]
pub struct SourceArgs {
    /// Curve text, e.g. "x1 = cos(t); x2 = sin(t); t in [0, 6]".
    #[arg(long)]
    pub curve: Option<String>,
    /// File holding curve text.
    #[arg(long)]
    pub curve_file: Option<PathBuf>,
    /// Curvature profile in TOML.
    #[arg(long)]
    pub profile: Option<PathBuf>,
    /// Constant-curvature curve.
    #[arg(long, value_parser = parse_canonical)]
    pub canonical: Option<CanonicalKind>,
    #[arg(long, allow_negative_numbers = true)]
    pub k1: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k2: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k3: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub k4: Option<f64>,
    /// Parameter (curves) or arclength (profiles) range.
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true)]
    pub range: Option<Vec<f64>>,
    /// Integration step for profile sources.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
}

#[derive(Debug, Clone, Args)]
pub struct TolArgs {
    #[arg(long, default_value_t = ClassifyConfig::default().rel_tol)]
    pub rel_tol: f64,
    #[arg(long, default_value_t = ClassifyConfig::default().coeff_tol)]
    pub coeff_tol: f64,
    #[arg(long, default_value_t = ClassifyConfig::default().const_tol)]
    pub const_tol: f64,
}

impl TolArgs {
    pub fn config(&self, window_samples: usize) -> Result<ClassifyConfig, CliError> {
        let cfg = ClassifyConfig {
            rel_tol: self.rel_tol,
            coeff_tol: self.coeff_tol,
            const_tol: self.const_tol,
            window_samples,
        };
        cfg.validate().map_err(|e| CliError::input(e.to_string()))?;
        Ok(cfg)
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutArgs {
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[command(flatten)]
    pub out: OutArgs,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

#[derive(Debug, Args)]
pub struct ClassifyArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    #[command(flatten)]
    pub tol: TolArgs,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SynthesizeArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    /// Ambient dimension (default: max(order, 3)).
    #[arg(long)]
    pub dim: Option<usize>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct SolveOdeArgs {
    /// gaw3-o3, gaw3-o4, gaw4-o3 or gaw4-o4.
    #[arg(value_parser = parse_ode)]
    pub equation: OdeKind,
    #[arg(long, allow_negative_numbers = true)]
    pub k1: f64,
    /// Initial κ₂ (κ₂ equations).
    #[arg(long, allow_negative_numbers = true)]
    pub k2: Option<f64>,
    /// Initial κ₃ (gaw3-o4).
    #[arg(long, allow_negative_numbers = true)]
    pub k3: Option<f64>,
    /// Initial derivative of the unknown.
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub dk: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub c: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_negative_numbers = true, required = true)]
    pub range: Vec<f64>,
    /// Output grid spacing.
    #[arg(long, default_value_t = DEFAULT_STEP)]
    pub step: f64,
    #[arg(long, default_value_t = DEFAULT_ODE_TOL)]
    pub tol: f64,
    /// Metadata JSON (default: `<out>.meta.json`, or stderr without --out).
    #[arg(long)]
    pub meta: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// Suite TOML (default: the built-in suite).
    #[arg(long)]
    pub suite: Option<PathBuf>,
    /// Also run the converse perturbation probes.
    #[arg(long)]
    pub probes: bool,
    #[command(flatten)]
    pub tol: TolArgs,
    #[arg(long, default_value_t = ClassifyConfig::default().window_samples)]
    pub samples: usize,
    /// Also write the JSON report here.
    #[command(flatten)]
    pub out: OutArgs,
    /// Stdout carries the text summary unless `json` is chosen.
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Args)]
pub struct PlotdataArgs {
    #[command(flatten)]
    pub source: SourceArgs,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    pub samples: usize,
    /// 1-based coordinates to keep, e.g. "1,2" or "1,2,3".
    #[arg(long, default_value = "1,2,3")]
    pub proj: String,
    /// Also write an SVG polyline of the first two projected coordinates.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[command(flatten)]
    pub out: OutArgs,
}

fn parse_canonical(s: &str) -> Result<CanonicalKind, String> {
    s.parse()
}

fn parse_ode(s: &str) -> Result<OdeKind, String> {
    s.parse()
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let rendered = match e.kind() {
                ErrorKind::DisplayHelpOnMissingArgumentOrSubcommand => "a subcommand is required; see --help".to_string(),
                _ => e.to_string(),
            };
            let first = rendered
                .lines()
                .find(|l| !l.trim().is_empty())
                .unwrap_or("invalid arguments")
                .trim_start_matches("error: ");
            eprintln!("{}", CliError { code: "usage", exit: 2, message: first.to_string() }.line());
            return 2;
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.line());
            e.exit
        }
    }
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::input("--threads must be positive"));
        }
        // A pool may already exist when the CLI runs inside a test process.
        if rayon::ThreadPoolBuilder::new().num_threads(n).build_global().is_err() {
            log::warn!("thread pool already initialized; --threads ignored");
        }
    }
    match cli.command {
        Command::Analyze(a) => commands::analyze(&a),
        Command::Classify(a) => commands::classify(&a),
        Command::Synthesize(a) => commands::synthesize(&a),
        Command::SolveOde(a) => commands::solve_ode(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Plotdata(a) => commands::plotdata(&a),
    }
}
