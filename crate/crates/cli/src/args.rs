//! Command-line surface. Every flag may also be given in a `--config` file
//! of `key = value` lines; flags on the command line take precedence.

use std::ffi::OsString;
use std::path::PathBuf;

use aoimse::coding::SourceVarMode;
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(
    name = "aoimse",
    version,
    about = "Time-average MSE and Age-of-Information of a Gauss-Markov process sent over a short-blocklength AWGN link",
    long_about = "Time-average MSE and Age-of-Information of a Gauss-Markov process sent over a \
                  short-blocklength AWGN link.\n\nUnits: alpha is seconds per channel symbol; beta, \
                  s, r and AoI are seconds; MSE is in state-variance units.",
    args_override_self = true
)]
pub struct Cli {
    /// Worker threads for sweeps and simulations (default: all cores).
    #[arg(long, global = true, value_parser = positive_usize)]
    pub threads: Option<usize>,

    /// File of `key = value` lines, one flag per line; `#` starts a comment.
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate one (d, eps) cell and print a CSV row.
    #[command(args_override_self = true)]
    Point(PointArgs),
    /// Evaluate a (d, eps) grid and write CSV files.
    #[command(args_override_self = true)]
    Sweep(SweepArgs),
    /// Extract the Pareto front from an existing sweep CSV.
    #[command(args_override_self = true)]
    Front(FrontArgs),
    /// Simulate one (d, eps) cell and print empirical means and standard errors.
    #[command(args_override_self = true)]
    Simulate(SimulateArgs),
    /// Cross-check analytic results against numeric and Monte Carlo oracles.
    #[command(args_override_self = true)]
    Validate(ValidateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceVar {
    /// Eigenvalues of the steady-state covariance Q_x.
    Steady,
    /// Eigenvalues of Q_x + q_w I.
    Receiver,
}

impl From<SourceVar> for SourceVarMode {
    fn from(v: SourceVar) -> Self {
        match v {
            SourceVar::Steady => SourceVarMode::SteadyState,
            SourceVar::Receiver => SourceVarMode::ReceiverOutput,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisSpacing {
    Linear,
    Log,
}

/// Process, channel, link and estimator parameters shared by all commands.
#[derive(Debug, Clone, Args)]
pub struct SystemArgs {
    /// Scalar system coefficient (must be negative); A = a I when --k > 1.
    #[arg(long, default_value_t = -0.02, allow_negative_numbers = true, value_parser = finite)]
    pub a: f64,

    /// Input noise variance; Q_u = q_u I unless --qu-matrix is given.
    #[arg(long = "q-u", default_value_t = 1.0, value_parser = positive)]
    pub q_u: f64,

    /// State dimension.
    #[arg(long, default_value_t = 1, value_parser = dimension)]
    pub k: usize,

    /// Row-major comma-separated k×k system matrix.
    #[arg(long = "a-matrix", value_name = "LIST", allow_hyphen_values = true)]
    pub a_matrix: Option<String>,

    /// Row-major comma-separated k×k input noise covariance.
    #[arg(long = "qu-matrix", value_name = "LIST", allow_hyphen_values = true)]
    pub qu_matrix: Option<String>,

    /// Linear channel SNR P.
    #[arg(long, default_value_t = 10.0, value_parser = positive)]
    pub snr: f64,

    /// Seconds per channel symbol.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub alpha: f64,

    /// Fixed per-attempt overhead in seconds.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub beta: f64,

    /// Waiting time after each ACK in seconds.
    #[arg(long, default_value_t = 0.0, value_parser = nonnegative)]
    pub s: f64,

    /// Distortion noise variance; defaults to d (worst case). Must not exceed d.
    #[arg(long = "q-w", value_parser = nonnegative)]
    pub q_w: Option<f64>,

    /// Covariance whose eigenvalues enter the rate-distortion function.
    #[arg(long = "source-var", value_enum, default_value_t = SourceVar::Steady)]
    pub source_var: SourceVar,

    /// Round the blocklength up to a whole number of channel uses.
    #[arg(long = "integer-blocklength")]
    pub integer_blocklength: bool,
}

#[derive(Debug, Args)]
pub struct PointArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    /// Tolerated distortion.
    #[arg(long, value_parser = positive)]
    pub d: f64,

    /// Excess-distortion probability.
    #[arg(long, value_parser = open_unit)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct GridArgs {
    /// Smallest d (default: 1e-3 times the largest eigenvalue of Q_x).
    #[arg(long = "d-min", value_parser = positive)]
    pub d_min: Option<f64>,

    /// Largest d (default: 0.99 times the largest eigenvalue of Q_x).
    #[arg(long = "d-max", value_parser = positive)]
    pub d_max: Option<f64>,

    #[arg(long = "d-points", default_value_t = 60, value_parser = positive_usize)]
    pub d_points: usize,

    #[arg(long = "d-spacing", value_enum, default_value_t = AxisSpacing::Log)]
    pub d_spacing: AxisSpacing,

    #[arg(long = "eps-min", default_value_t = 1e-4, value_parser = open_unit)]
    pub eps_min: f64,

    #[arg(long = "eps-max", default_value_t = 0.9, value_parser = open_unit)]
    pub eps_max: f64,

    #[arg(long = "eps-points", default_value_t = 60, value_parser = positive_usize)]
    pub eps_points: usize,

    #[arg(long = "eps-spacing", value_enum, default_value_t = AxisSpacing::Linear)]
    pub eps_spacing: AxisSpacing,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[command(flatten)]
    pub grid: GridArgs,

    /// Output CSV; the front goes to `<stem>.front.csv` next to it.
    #[arg(long, short, value_name = "PATH")]
    pub out: PathBuf,

    /// Also write the boundary curves to `<stem>.curves.csv`.
    #[arg(long)]
    pub curves: bool,
}

#[derive(Debug, Args)]
pub struct FrontArgs {
    /// Sweep CSV to read.
    #[arg(long, short, value_name = "PATH")]
    pub input: PathBuf,

    /// Output CSV (default: standard output).
    #[arg(long, short, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 200, value_parser = positive_usize)]
    pub paths: usize,

    /// Cycles per path after burn-in.
    #[arg(long, default_value_t = 500, value_parser = positive_usize)]
    pub cycles: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Integration cell width in seconds (default: r/50; at most r/10).
    #[arg(long = "grid-step", value_parser = positive)]
    pub grid_step: Option<f64>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    #[arg(long, value_parser = positive)]
    pub d: f64,

    #[arg(long, value_parser = open_unit)]
    pub eps: f64,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub system: SystemArgs,

    #[command(flatten)]
    pub sim: SimArgs,

    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub d: f64,

    /// Excess-distortion probability; 0 skips the coding checks and uses --r.
    #[arg(long, default_value_t = 0.1, value_parser = half_open_unit)]
    pub eps: f64,

    /// Per-attempt delay used when --eps is 0.
    #[arg(long, default_value_t = 1.0, value_parser = positive)]
    pub r: f64,

    /// Perturb the analytic AoI by 10% to check that the harness reports failure.
    #[arg(long = "force-fail")]
    pub force_fail: bool,
}

fn number(s: &str) -> Result<f64, String> {
    s.trim().parse::<f64>().map_err(|e| format!("not a number ({e})"))
}

fn finite(s: &str) -> Result<f64, String> {
    let x = number(s)?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err("must be finite".into())
    }
}

fn positive(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x > 0.0 {
        Ok(x)
    } else {
        Err("must be > 0".into())
    }
}

fn nonnegative(s: &str) -> Result<f64, String> {
    let x = finite(s)?;
    if x >= 0.0 {
        Ok(x)
    } else {
        Err("must be >= 0".into())
    }
}

fn open_unit(s: &str) -> Result<f64, String> {
    let x = number(s)?;
    if x > 0.0 && x < 1.0 {
        Ok(x)
    } else {
        Err("must lie strictly between 0 and 1".into())
    }
}

fn half_open_unit(s: &str) -> Result<f64, String> {
    let x = number(s)?;
    if (0.0..1.0).contains(&x) {
        Ok(x)
    } else {
        Err("must lie in [0, 1)".into())
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        Ok(_) => Err("must be a positive integer".into()),
        Err(e) => Err(format!("not a positive integer ({e})")),
    }
}

fn dimension(s: &str) -> Result<usize, String> {
    let n = positive_usize(s)?;
    if n <= aoimse::linalg::MAX_DIM {
        Ok(n)
    } else {
        Err(format!("must be at most {}", aoimse::linalg::MAX_DIM))
    }
}

/// Parses a `key = value` config file into flag arguments. A value of
/// `true` yields a bare switch and `false` omits it.
pub fn config_args(text: &str) -> Result<Vec<OsString>, String> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`", no + 1))?;
        let key = key.trim().trim_start_matches("--").replace('_', "-");
        if key.is_empty() || key == "config" {
            return Err(format!("config line {}: invalid key", no + 1));
        }
        match value.trim() {
            "true" => out.push(format!("--{key}").into()),
            "false" => {}
            v => {
                out.push(format!("--{key}").into());
                out.push(v.into());
            }
        }
    }
    Ok(out)
}

/// Inserts config-file arguments right after the subcommand name so that
/// later command-line occurrences override them.
pub fn splice_config(argv: Vec<OsString>, extra: Vec<OsString>) -> Vec<OsString> {
    const COMMANDS: [&str; 5] = ["point", "sweep", "front", "simulate", "validate"];
    let pos = argv
        .iter()
        .position(|a| a.to_str().is_some_and(|s| COMMANDS.contains(&s)));
    match pos {
        Some(i) => {
            let mut out = argv[..=i].to_vec();
            out.extend(extra);
            out.extend_from_slice(&argv[i + 1..]);
            out
        }
        None => argv,
    }
}

/// Locates `--config PATH` or `--config=PATH` in raw arguments.
pub fn find_config(argv: &[OsString]) -> Option<PathBuf> {
    let mut it = argv.iter();
    while let Some(a) = it.next() {
        let s = a.to_string_lossy();
        if s == "--config" {
            return it.next().map(PathBuf::from);
        }
        if let Some(p) = s.strip_prefix("--config=") {
            return Some(PathBuf::from(p));
        }
    }
    None
}
