//! JSON config files, flag overrides and the resolved problem definitions.

use std::fmt;
use std::path::{Path, PathBuf};

use kpp_core::eigen::EigenMethod;
use kpp_core::sweeps::GridPolicy;
use kpp_core::{Error, GridSpec, MinimizeOptions, ShearSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::args::{Method, ProblemArgs, ShearArgs, Spacing};

pub const EX_NUMERICAL: i32 = 2;
pub const EX_USAGE: i32 = 64;

pub const DEFAULT_GRID: usize = 32;

#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Numerical(String),
}

impl Failure {
    pub fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EX_USAGE,
            Failure::Numerical(_) => EX_NUMERICAL,
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Failure::Usage(m) => write!(f, "usage error: {m}"),
            Failure::Numerical(m) => write!(f, "numerical failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidGrid(_)
            | Error::InvalidParameter { .. }
            | Error::DimensionMismatch { .. }
            | Error::Domain(_)
            | Error::Cfl { .. }
            | Error::Parse { .. }
            | Error::Io(_)
            | Error::Json(_)
            | Error::IndexOutOfRange { .. }
            | Error::FlatIndexOutOfRange { .. } => Failure::Usage(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

pub fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

pub type CliResult<T> = std::result::Result<T, Failure>;

pub fn load_json<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))
}

/// `NYxNT`, e.g. `32x32`.
pub fn parse_grid(text: &str) -> CliResult<(usize, usize)> {
    let bad = || usage(format!("grid must look like 32x32, got `{text}`"));
    let (a, b) = text.trim().split_once(['x', 'X']).ok_or_else(bad)?;
    Ok((a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?))
}

pub fn parse_policy(text: &str) -> CliResult<GridPolicy> {
    if text.trim().eq_ignore_ascii_case("scaled") {
        return Ok(GridPolicy::Scaled);
    }
    let (n_y, n_tau) = parse_grid(text)?;
    Ok(GridPolicy::Fixed { n_y, n_tau })
}

/// `LO:HI` with either side optionally empty.
pub fn parse_range(text: &str) -> CliResult<(f64, f64)> {
    let bad = || usage(format!("range must look like LO:HI, got `{text}`"));
    let (lo, hi) = text.split_once(':').ok_or_else(bad)?;
    let side = |s: &str, default: f64| -> CliResult<f64> {
        let s = s.trim();
        if s.is_empty() {
            Ok(default)
        } else {
            s.parse().map_err(|_| bad())
        }
    };
    let (lo, hi) = (side(lo, f64::MIN_POSITIVE)?, side(hi, f64::INFINITY)?);
    if !(lo <= hi) {
        return Err(usage(format!("range `{text}` is empty")));
    }
    Ok((lo, hi))
}

pub fn positive(name: &str, x: f64) -> CliResult<f64> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(usage(format!("--{name} must be positive and finite, got {x}")))
    }
}

/// Shear fields of a config file.
#[derive(Debug, Clone, Default)]
pub struct ShearFile {
    pub delta: Option<f64>,
    pub freq: Option<u32>,
    pub shear: Option<ShearSpec>,
    pub shear_csv: Option<PathBuf>,
}

/// Precedence: a CSV table, then the parametric family when any of
/// `--delta`/`--freq` was given, then the file's `shear`, then the file's
/// parametric fields.
pub fn resolve_shear(flags: &ShearArgs, file: &ShearFile) -> CliResult<ShearSpec> {
    if let Some(path) = flags.shear_csv.as_ref().or(file.shear_csv.as_ref()) {
        return ShearSpec::from_csv(path).map_err(|e| usage(format!("{}: {e}", path.display())));
    }
    if flags.delta.is_none() && flags.freq.is_none() {
        if let Some(spec) = &file.shear {
            return Ok(spec.clone());
        }
    }
    let delta = flags.delta.or(file.delta).unwrap_or(0.0);
    if !delta.is_finite() {
        return Err(usage(format!("--delta must be finite, got {delta}")));
    }
    Ok(ShearSpec::parametric(delta, flags.freq.or(file.freq).unwrap_or(0)))
}

pub fn resolve_fprime0(flag: Option<f64>, file: Option<f64>) -> CliResult<f64> {
    positive("fprime0", flag.or(file).unwrap_or(1.0))
}

/// Config file accepted by `speed` and `curve`.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemFile {
    pub delta: Option<f64>,
    pub freq: Option<u32>,
    pub shear: Option<ShearSpec>,
    pub shear_csv: Option<PathBuf>,
    pub fprime0: Option<f64>,
    pub grid: Option<String>,
    pub method: Option<EigenMethod>,
    pub minimize: Option<MinimizeOptions>,
    pub lambda_min: Option<f64>,
    pub lambda_max: Option<f64>,
    pub lambda_steps: Option<usize>,
    pub spacing: Option<Spacing>,
}

/// Fully resolved eigenproblem, echoed into outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Problem {
    pub shear: ShearSpec,
    pub fprime0: f64,
    pub grid: GridSpec,
    pub minimize: MinimizeOptions,
}

impl ProblemFile {
    fn shear_file(&self) -> ShearFile {
        ShearFile {
            delta: self.delta,
            freq: self.freq,
            shear: self.shear.clone(),
            shear_csv: self.shear_csv.clone(),
        }
    }
}

pub fn resolve_problem(args: &ProblemArgs, file: &ProblemFile) -> CliResult<Problem> {
    let shear = resolve_shear(&args.shear, &file.shear_file())?;
    let fprime0 = resolve_fprime0(args.shear.fprime0, file.fprime0)?;
    let requested = args.grid.as_deref().or(file.grid.as_deref()).map(parse_grid).transpose()?;
    let (n_y, n_tau) = match (&shear, requested) {
        (ShearSpec::Tabulated { n_y, n_tau, .. }, Some(g)) if g != (*n_y, *n_tau) => {
            return Err(usage(format!("--grid {}x{} does not match the {n_y}x{n_tau} shear table", g.0, g.1)));
        }
        (ShearSpec::Tabulated { n_y, n_tau, .. }, _) => (*n_y, *n_tau),
        (_, Some(g)) => g,
        (_, None) => (DEFAULT_GRID, DEFAULT_GRID),
    };
    let grid = GridSpec::unit(n_y, n_tau)?;
    let mut minimize = file.minimize.unwrap_or_default();
    match args.method {
        Some(Method::ShiftInvert) => minimize.method = EigenMethod::ShiftInvert,
        Some(Method::Dense) => minimize.method = EigenMethod::Dense,
        None => {
            if let Some(m) = file.method {
                minimize.method = m;
            }
        }
    }
    Ok(Problem {
        shear,
        fprime0,
        grid,
        minimize,
    })
}
