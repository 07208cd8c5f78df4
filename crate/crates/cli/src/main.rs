mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qbmor_core::Error;

/// Model reduction for quadratic-bilinear control systems.
#[derive(Debug, Parser)]
#[command(name = "qbmor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a benchmark model to disk.
    Generate(GenerateArgs),
    /// Reduce a stored system.
    Reduce(ReduceArgs),
    /// Compare a stored system with a reduced model.
    Report(ReportArgs),
    /// Truncated H2 error of TQB-IRKA over a range of orders.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum Model {
    Chafee,
    Fhn,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    pub model: Model,
    /// Number of grid points.
    #[arg(long)]
    pub k: usize,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    TqbIrka,
    Bt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Init {
    Random,
    Linear,
}

/// Iteration settings shared by `reduce` and `sweep`.
#[derive(Debug, Args)]
pub struct IrkaFlags {
    /// Relative eigenvalue-change tolerance.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    #[arg(long, default_value_t = 100)]
    pub maxit: usize,
    /// Scaling factor applied to H and N for basis construction.
    #[arg(long, default_value_t = 1.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Build bases from A + shift·I (e.g. -0.01 for a marginally unstable A).
    #[arg(long, allow_hyphen_values = true)]
    pub shift: Option<f64>,
    /// Keep unstable reduced eigenvalues instead of mirroring them.
    #[arg(long)]
    pub no_reflect: bool,
}

#[derive(Debug, Args)]
pub struct ReduceArgs {
    /// System directory or manifest.
    pub system: PathBuf,
    #[arg(long, value_enum, default_value_t = Method::TqbIrka)]
    pub method: Method,
    #[arg(long)]
    pub r: usize,
    #[arg(long, value_enum, default_value_t = Init::Random)]
    pub init: Init,
    #[command(flatten)]
    pub irka: IrkaFlags,
    /// Output directory for the reduced model and its report.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum What {
    Residuals,
    H2err,
    Simulate,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub what: What,
    /// Full system directory or manifest.
    pub system: PathBuf,
    /// Reduced model directory or manifest.
    pub reduced: PathBuf,
    /// Scaling factor for the residuals (default: the one stored with the model).
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Input signal: ci_u1, ci_u2, fhn_i0_sin or fhn_i0_bump.
    #[arg(long)]
    pub input: Option<String>,
    /// Final time.
    #[arg(long = "T", default_value_t = 10.0)]
    pub t_end: f64,
    /// Output samples on the uniform grid.
    #[arg(long, default_value_t = 501)]
    pub samples: usize,
    /// Trajectory CSV (simulate only).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub system: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub r_min: usize,
    #[arg(long, default_value_t = 10)]
    pub r_max: usize,
    /// Random starts per order; the lowest error is kept.
    #[arg(long, default_value_t = 3)]
    pub starts: usize,
    #[command(flatten)]
    pub irka: IrkaFlags,
    /// CSV destination (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Outcome of a command that ran to the end.
pub enum Status {
    Done,
    NotConverged,
}

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Core(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(Error::Io(e.to_string()))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Core(Error::Io(e.to_string()))
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Core(e) => match e {
                Error::Io(_) | Error::Parse(_) | Error::Invalid(_) | Error::Dimension(_) | Error::NonPositiveGamma(_) | Error::TooLarge(_) => 1,
                Error::NoConvergence(_) | Error::MaxIterationsExceeded(_) => 2,
                _ => 3,
            },
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "{m}"),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

fn init_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("QBMOR_THREADS") else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).ok_or_else(|| CliError::Usage(format!("QBMOR_THREADS must be a positive integer, got `{v}`")))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| CliError::Usage(e.to_string()))
}

fn run(cli: Cli) -> Result<Status, CliError> {
    init_threads()?;
    match cli.command {
        Command::Generate(a) => commands::generate(&a),
        Command::Reduce(a) => commands::reduce(&a),
        Command::Report(a) => commands::report(&a),
        Command::Sweep(a) => commands::sweep(&a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(Status::Done) => ExitCode::SUCCESS,
        Ok(Status::NotConverged) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
