use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// Minimal KPP front speeds in space-time periodic shear flows.
///
/// Shears are `b(y, τ) = δ sin(2πy)(1 + sin(2πnτ))` on the unit (y, τ) cell
/// unless a tabulated shear is supplied. Speeds are signed: a front invading
/// the u = 0 state toward −x has negative speed, so the zero-shear value is
/// `c* = −2√f'(0)`.
///
/// Exit codes: 0 success, 2 numerical failure, 64 usage error.
#[derive(Debug, Parser)]
#[command(name = "kppfront", version, about, long_about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimal speed c* = −inf μ(λ)/λ for one shear.
    Speed(SpeedArgs),
    /// Tabulate λ, μ(λ) and μ(λ)/λ as CSV.
    Curve(CurveArgs),
    /// Run a (δ, n) sweep and write one CSV record per pair.
    Sweep(SweepArgs),
    /// Fit the log-log slope of enhancement against δ in a sweep CSV.
    Fit(FitArgs),
    /// Evolve the reaction-diffusion-advection equation and measure the front speed.
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Args)]
pub struct ShearArgs {
    /// Shear amplitude δ (dimensionless) [default: 0]
    #[arg(long)]
    pub delta: Option<f64>,
    /// Temporal frequency n, in oscillations per unit time [default: 0]
    #[arg(long)]
    pub freq: Option<u32>,
    /// Tabulated shear, CSV with header `i_y,i_tau,value`; replaces --delta/--freq
    #[arg(long, value_name = "PATH")]
    pub shear_csv: Option<PathBuf>,
    /// Reaction slope f'(0) of f(u) = f'(0) u (1 − u), per unit time [default: 1]
    #[arg(long)]
    pub fprime0: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    ShiftInvert,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    Linear,
    Log,
}

#[derive(Debug, Clone, Args)]
pub struct ProblemArgs {
    #[command(flatten)]
    pub shear: ShearArgs,
    /// Collocation points in y and τ, e.g. 32x32 [default: 32x32, or the table size]
    #[arg(long, value_name = "NYxNT")]
    pub grid: Option<String>,
    /// Principal eigenvalue solver [default: shift-invert]
    #[arg(long, value_enum)]
    pub method: Option<Method>,
    /// JSON config file; explicit flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SpeedArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Starting λ for the minimizer, per unit length [default: √f'(0)]
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Write the result and effective config as JSON
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub problem: ProblemArgs,
    /// Smallest λ, per unit length [default: 0.05]
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Largest λ, per unit length [default: 5]
    #[arg(long)]
    pub lambda_max: Option<f64>,
    /// Number of λ values, at least 2 [default: 100]
    #[arg(long)]
    pub lambda_steps: Option<usize>,
    /// Spacing of the λ values [default: linear]
    #[arg(long, value_enum)]
    pub spacing: Option<Spacing>,
    /// Output CSV (`lambda,mu,h`) [default: stdout]
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    /// JSON sweep config (deltas, freqs, fprime0, grid, warm_start, execution, minimize)
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Comma-separated amplitudes δ [required unless --config]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub deltas: Option<Vec<f64>>,
    /// Comma-separated temporal frequencies n [required unless --config]
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub freqs: Option<Vec<u32>>,
    /// Reaction slope f'(0), per unit time [default: 1]
    #[arg(long)]
    pub fprime0: Option<f64>,
    /// `NYxNT` for a fixed grid, or `scaled` for max(32, 8n, even ≥ 4√δ + 8) [default: scaled]
    #[arg(long, value_name = "NYxNT|scaled")]
    pub grid: Option<String>,
    /// Start each δ from the previous minimizer at the same frequency [default: off]
    #[arg(long)]
    pub warm_start: bool,
    /// Run pairs one at a time instead of on the thread pool [default: off]
    #[arg(long)]
    pub sequential: bool,
    /// Output CSV; metadata goes to the sibling `.meta.json`
    #[arg(long, value_name = "PATH")]
    pub out: PathBuf,
    /// Also write a whitespace-separated table for gnuplot
    #[arg(long, value_name = "PATH")]
    pub gnuplot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct FitArgs {
    /// Sweep CSV written by `sweep`
    #[arg(long, value_name = "PATH")]
    pub input: PathBuf,
    /// Inclusive δ range `LO:HI`; either side may be empty [default: all]
    #[arg(long, value_name = "LO:HI")]
    pub range: Option<String>,
    /// Keep only records with this frequency; required when the file mixes frequencies
    #[arg(long)]
    pub freq: Option<u32>,
}

#[derive(Debug, Clone, Args)]
pub struct OracleArgs {
    #[command(flatten)]
    pub shear: ShearArgs,
    /// JSON oracle config; explicit flags override its values
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Strip length L in x, in spatial units [default: 200]
    #[arg(long)]
    pub domain_length: Option<f64>,
    /// Grid points in x including both ends [default: 2000]
    #[arg(long)]
    pub nx: Option<usize>,
    /// Grid points across the unit y-period, 1 or ≥ 3 [default: 16]
    #[arg(long)]
    pub ny: Option<usize>,
    /// Time step, in time units [default: 0.25·min(h_x/‖b‖∞, h_x²), shortened to divide 1]
    #[arg(long)]
    pub dt: Option<f64>,
    /// Final time, in time units [default: 40]
    #[arg(long)]
    pub t_final: Option<f64>,
    /// Level of u tracked as the front, in (0, 1) [default: 0.5]
    #[arg(long)]
    pub front_level: Option<f64>,
    /// Trailing fraction of the run used for the speed fit, in (0, 1] [default: 0.5]
    #[arg(long)]
    pub window: Option<f64>,
    /// λ* for the ln t lag correction [default: √f'(0) without shear, else the variational λ*]
    #[arg(long)]
    pub lambda_star: Option<f64>,
    /// Switch the reaction off (pure advection-diffusion) [default: on]
    #[arg(long)]
    pub no_reaction: bool,
    /// Keep the upwind numerical diffusion uncompensated [default: compensated]
    #[arg(long)]
    pub raw_upwind: bool,
    /// Output trace CSV (`time,position`); metadata goes to the sibling `.meta.json`
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
}
