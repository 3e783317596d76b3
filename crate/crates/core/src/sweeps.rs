//! Amplitude/frequency sweeps over the parametric shear family, their CSV
//! persistence, and log-log exponent fits.

use std::fmt::Write as _;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::GridSpec;
use crate::shear::ShearSpec;
use crate::variational::{enhancement, minimize_h, MinimizeOptions, SpeedResult};

pub const CSV_HEADER: &str = "delta,freq,lambda_star,c_star,enhancement,iterations,residual";

/// Default δ windows for the two scaling regimes.
pub const SMALL_DELTA_RANGE: (f64, f64) = (0.1, 1.0);
pub const LARGE_DELTA_RANGE: (f64, f64) = (20.0, 100.0);

/// How the collocation grid is chosen per `(δ, n)` pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GridPolicy {
    Fixed { n_y: usize, n_tau: usize },
    /// `n = max(32, 8n, even ≥ 4√δ + 8)` in both directions.
    Scaled,
}

impl GridPolicy {
    pub fn grid_for(&self, delta: f64, freq: u32) -> Result<GridSpec> {
        match *self {
            GridPolicy::Fixed { n_y, n_tau } => GridSpec::unit(n_y, n_tau),
            GridPolicy::Scaled => GridSpec::square(scaled_grid_size(delta, freq)),
        }
    }
}

/// Grid size used by [`GridPolicy::Scaled`].
pub fn scaled_grid_size(delta: f64, freq: u32) -> usize {
    let amp = (4.0 * delta.max(0.0).sqrt() + 8.0).ceil() as usize;
    let amp = amp + amp % 2;
    32.max(8 * freq as usize).max(amp)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub deltas: Vec<f64>,
    pub freqs: Vec<u32>,
    #[serde(default = "default_fprime0")]
    pub fprime0: f64,
    #[serde(default = "default_policy")]
    pub grid: GridPolicy,
    /// Start each δ from the previous δ's minimizer at the same frequency.
    /// Serializes the work within each frequency.
    #[serde(default)]
    pub warm_start: bool,
    #[serde(default)]
    pub execution: Execution,
    #[serde(default)]
    pub minimize: MinimizeOptions,
}

fn default_fprime0() -> f64 {
    1.0
}

fn default_policy() -> GridPolicy {
    GridPolicy::Scaled
}

impl SweepConfig {
    pub fn new(deltas: Vec<f64>, freqs: Vec<u32>) -> Self {
        SweepConfig {
            deltas,
            freqs,
            fprime0: default_fprime0(),
            grid: default_policy(),
            warm_start: false,
            execution: Execution::default(),
            minimize: MinimizeOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, reason: &str| {
            Err(Error::InvalidParameter {
                name,
                reason: reason.to_string(),
            })
        };
        if self.deltas.is_empty() {
            return bad("deltas", "must be nonempty");
        }
        if self.freqs.is_empty() {
            return bad("freqs", "must be nonempty");
        }
        if self.deltas.iter().any(|d| !(d.is_finite() && *d >= 0.0)) {
            return bad("deltas", "must be finite and nonnegative");
        }
        if self.deltas.windows(2).any(|w| w[0] >= w[1]) {
            return bad("deltas", "must be strictly ascending");
        }
        if self.freqs.windows(2).any(|w| w[0] >= w[1]) {
            return bad("freqs", "must be strictly ascending");
        }
        if !(self.fprime0 > 0.0 && self.fprime0.is_finite()) {
            return bad("fprime0", "must be positive and finite");
        }
        for &d in &self.deltas {
            for &n in &self.freqs {
                self.grid.grid_for(d, n)?;
            }
        }
        Ok(())
    }
}

/// One converged `(δ, n)` result.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub delta: f64,
    pub freq: u32,
    pub lambda_star: f64,
    pub c_star: f64,
    pub enhancement: f64,
    pub iterations: usize,
    pub residual: f64,
}

impl SweepRecord {
    pub fn from_result(delta: f64, freq: u32, result: &SpeedResult, fprime0: f64) -> Self {
        SweepRecord {
            delta,
            freq,
            lambda_star: result.lambda_star,
            c_star: result.c_star,
            enhancement: enhancement(result, fprime0),
            iterations: result.iterations,
            residual: result.residual,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepFailure {
    pub delta: f64,
    pub freq: u32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOutcome {
    /// Converged records, δ-major then frequency, in config order.
    pub records: Vec<SweepRecord>,
    pub failures: Vec<SweepFailure>,
    /// Largest relative eigen-identity defect seen in any solve.
    pub max_identity_defect: f64,
}

type PairOutcome = (f64, u32, Result<SpeedResult>);

fn solve_pair(cfg: &SweepConfig, delta: f64, freq: u32, lambda0: Option<f64>) -> PairOutcome {
    let run = || {
        let grid = cfg.grid.grid_for(delta, freq)?;
        let field = ShearSpec::parametric(delta, freq).sample(&grid)?;
        let opts = MinimizeOptions {
            lambda0: lambda0.or(cfg.minimize.lambda0),
            ..cfg.minimize
        };
        minimize_h(&field, &grid, cfg.fprime0, &opts)
    };
    (delta, freq, run())
}

/// Runs every `(δ, n)` pair. Per-pair failures are collected rather than
/// aborting; only an invalid config is an error.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepOutcome> {
    cfg.validate()?;
    let outcomes: Vec<PairOutcome> = if cfg.warm_start {
        let chains = exec::map(cfg.execution, &cfg.freqs, |&n| {
            let mut prev = None;
            cfg.deltas
                .iter()
                .map(|&d| {
                    let out = solve_pair(cfg, d, n, prev);
                    if let Ok(r) = &out.2 {
                        prev = Some(r.lambda_star);
                    }
                    out
                })
                .collect::<Vec<_>>()
        });
        // chains are frequency-major; reorder to δ-major
        let mut out = Vec::with_capacity(cfg.deltas.len() * cfg.freqs.len());
        let mut iters: Vec<_> = chains.into_iter().map(Vec::into_iter).collect();
        for _ in &cfg.deltas {
            for it in iters.iter_mut() {
                out.extend(it.next());
            }
        }
        out
    } else {
        let pairs: Vec<(f64, u32)> = cfg
            .deltas
            .iter()
            .flat_map(|&d| cfg.freqs.iter().map(move |&n| (d, n)))
            .collect();
        exec::map(cfg.execution, &pairs, |&(d, n)| solve_pair(cfg, d, n, None))
    };

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut max_identity_defect: f64 = 0.0;
    for (delta, freq, out) in outcomes {
        match out {
            Ok(r) if r.converged => {
                max_identity_defect = max_identity_defect.max(r.max_identity_defect);
                records.push(SweepRecord::from_result(delta, freq, &r, cfg.fprime0));
            }
            Ok(r) => failures.push(SweepFailure {
                delta,
                freq,
                message: format!("not converged after {} iterations", r.iterations),
            }),
            Err(e) => {
                log::warn!("sweep pair δ = {delta}, n = {freq} failed: {e}");
                failures.push(SweepFailure {
                    delta,
                    freq,
                    message: e.to_string(),
                })
            }
        }
    }
    Ok(SweepOutcome {
        records,
        failures,
        max_identity_defect,
    })
}

/// Least-squares line through `(ln δ, ln enhancement)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogLogFit {
    pub slope: f64,
    pub intercept: f64,
    pub points: usize,
    pub excluded: usize,
}

/// Fits `enhancement ∝ δ^p` over records with `lo ≤ δ ≤ hi`.
pub fn fit_loglog_slope(records: &[SweepRecord], range: (f64, f64)) -> Result<LogLogFit> {
    let (lo, hi) = range;
    if !(lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidParameter {
            name: "range",
            reason: format!("need 0 < lo <= hi, got {lo}:{hi}"),
        });
    }
    let inside: Vec<&SweepRecord> = records.iter().filter(|r| r.delta >= lo && r.delta <= hi).collect();
    if let Some(w) = inside.windows(2).find(|w| w[0].freq != w[1].freq) {
        return Err(Error::InvalidParameter {
            name: "records",
            reason: format!("mixed frequencies {} and {}; select one", w[0].freq, w[1].freq),
        });
    }
    let mut pts = Vec::new();
    let mut excluded = 0;
    for r in inside {
        if r.enhancement > 0.0 {
            pts.push((r.delta.ln(), r.enhancement.ln()));
        } else {
            log::warn!("excluding δ = {} with nonpositive enhancement {}", r.delta, r.enhancement);
            excluded += 1;
        }
    }
    let (slope, intercept) = least_squares(&pts)?;
    Ok(LogLogFit {
        slope,
        intercept,
        points: pts.len(),
        excluded,
    })
}

/// Slope and intercept of the least-squares line; at least three points.
pub fn least_squares(pts: &[(f64, f64)]) -> Result<(f64, f64)> {
    if pts.len() < 3 {
        return Err(Error::InsufficientData {
            needed: 3,
            found: pts.len(),
        });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData { needed: 2, found: 1 });
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `%.17g`: 17 significant digits, trailing zeros dropped, exponent form
/// outside `[1e-4, 1e17)`. Round-trips every finite `f64`.
pub fn format_float(x: f64) -> String {
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    if !x.is_finite() {
        return if x.is_nan() {
            "nan".into()
        } else if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..17).contains(&exp) {
        let mantissa = strip_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{mantissa}e{sign}{:02}", exp.abs());
    }
    strip_zeros(&format!("{:.*}", (16 - exp) as usize, x)).to_string()
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// Renders records as CSV text (header plus one LF-terminated row each).
pub fn records_to_csv(records: &[SweepRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            format_float(r.delta),
            r.freq,
            format_float(r.lambda_star),
            format_float(r.c_star),
            format_float(r.enhancement),
            r.iterations,
            format_float(r.residual)
        );
    }
    out
}

pub fn write_records(records: &[SweepRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(records_to_csv(records).as_bytes())?;
    w.flush()?;
    Ok(())
}

pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<SweepRecord>> {
    parse_records(std::fs::File::open(path)?)
}

pub fn parse_records(reader: impl std::io::Read) -> Result<Vec<SweepRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut rows = rdr.records();
    let header = match rows.next() {
        Some(row) => row.map_err(|e| csv_error(&e, 1))?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "missing header".into(),
            })
        }
    };
    if header.iter().collect::<Vec<_>>().join(",") != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header `{CSV_HEADER}`"),
        });
    }
    let mut out = Vec::new();
    for row in rows {
        let row = row.map_err(|e| csv_error(&e, 0))?;
        let line = row.position().map_or(0, |p| p.line());
        if row.len() != 7 {
            return Err(Error::Parse {
                line,
                message: format!("expected 7 fields, found {}", row.len()),
            });
        }
        let float = |i: usize| -> Result<f64> {
            row[i].parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} is not a number: `{}`", i + 1, &row[i]),
            })
        };
        let int = |i: usize| -> Result<u64> {
            row[i].parse().map_err(|_| Error::Parse {
                line,
                message: format!("field {} is not a nonnegative integer: `{}`", i + 1, &row[i]),
            })
        };
        out.push(SweepRecord {
            delta: float(0)?,
            freq: u32::try_from(int(1)?).map_err(|_| Error::Parse {
                line,
                message: "frequency out of range".into(),
            })?,
            lambda_star: float(2)?,
            c_star: float(3)?,
            enhancement: float(4)?,
            iterations: int(5)? as usize,
            residual: float(6)?,
        });
    }
    Ok(out)
}

fn csv_error(e: &csv::Error, fallback: u64) -> Error {
    Error::Parse {
        line: e.position().map_or(fallback, |p| p.line()),
        message: e.to_string(),
    }
}

/// Whitespace-separated `delta enhancement c_star` blocks, one per frequency,
/// separated by two blank lines so gnuplot's `index` selects a curve.
pub fn records_to_gnuplot(records: &[SweepRecord]) -> String {
    let mut freqs: Vec<u32> = records.iter().map(|r| r.freq).collect();
    freqs.sort_unstable();
    freqs.dedup();
    let mut out = String::from("# delta enhancement c_star\n");
    for (k, n) in freqs.iter().enumerate() {
        if k > 0 {
            out.push_str("\n\n");
        }
        let _ = writeln!(out, "# freq {n}");
        for r in records.iter().filter(|r| r.freq == *n) {
            let _ = writeln!(
                out,
                "{} {} {}",
                format_float(r.delta),
                format_float(r.enhancement),
                format_float(r.c_star)
            );
        }
    }
    out
}

/// Sidecar describing how a records file was produced.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub tool: String,
    pub version: String,
    pub fprime0: f64,
    pub grids: Vec<PairGrid>,
    pub tolerances: MinimizeOptions,
    pub warm_start: bool,
    pub execution: Execution,
    pub sign_convention: String,
    pub enhancement_baseline: String,
    pub failures: Vec<SweepFailure>,
    /// The effective configuration after flag overrides.
    pub config: serde_json::Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGrid {
    pub delta: f64,
    pub freq: u32,
    pub n_y: usize,
    pub n_tau: usize,
}

impl SweepMetadata {
    pub fn new(cfg: &SweepConfig, outcome: &SweepOutcome) -> Result<Self> {
        let mut grids = Vec::new();
        for &delta in &cfg.deltas {
            for &freq in &cfg.freqs {
                let g = cfg.grid.grid_for(delta, freq)?;
                grids.push(PairGrid {
                    delta,
                    freq,
                    n_y: g.n_y(),
                    n_tau: g.n_tau(),
                });
            }
        }
        Ok(SweepMetadata {
            tool: "kpp-core".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            fprime0: cfg.fprime0,
            grids,
            tolerances: cfg.minimize,
            warm_start: cfg.warm_start,
            execution: cfg.execution,
            sign_convention: "c_star < 0: fronts invade the unstable state toward -x".into(),
            enhancement_baseline: "enhancement = -2*sqrt(fprime0) - c_star".into(),
            failures: outcome.failures.clone(),
            config: serde_json::to_value(cfg)?,
        })
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }
}

/// `sweep.csv` → `sweep.meta.json`.
pub fn metadata_path(records_path: impl AsRef<Path>) -> PathBuf {
    records_path.as_ref().with_extension("meta.json")
}
