//! Direct simulation of `u_t = Δu + b(y, t) u_x + f'(0) u (1 − u)` on the
//! strip `[0, L] × [0, 1)` from step data, with front tracking.
//!
//! Each time step is a Lie splitting of explicit upwind advection, explicit
//! reaction, implicit x-diffusion (u = 0 at x = 0, u = 1 at x = L) and
//! implicit periodic y-diffusion, all second-order finite differences. Every
//! substep is monotone, so `u` stays in `[0, 1]`. The front invades the
//! 0-state leftward and speeds come out negative, on the same scale as `c*`.
//!
//! Upwinding adds an x-diffusion of `|b| h/2 − b² dt/2`. With
//! `compensate_upwind` the implicit x-diffusion of each row is reduced by
//! that amount, which leaves the scheme monotone but removes the O(h) bias.
//!
//! A front grown from step data trails the traveling wave by
//! `(3 / 2λ*) ln t`. [`estimate_speed`] is the plain least-squares slope and
//! carries that lag; [`estimate_speed_log_corrected`] subtracts it first.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::shear::ShearSpec;
use crate::sweeps::{format_float, least_squares};

/// Fronts closer than this many cells to either end abort the run.
pub const BOUNDARY_MARGIN: usize = 10;
pub const MIN_FIT_SAMPLES: usize = 10;
pub const BOUNDS_TOLERANCE: f64 = 1e-6;
pub const TRACE_HEADER: &str = "time,position";

/// τ-samples per period used to bound `‖b‖∞` before `dt` is known.
const BOUND_SAMPLES: usize = 1024;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub shear: ShearSpec,
    pub fprime0: f64,
    /// Strip length `L`.
    pub domain_length: f64,
    /// Grid points in x, boundaries included.
    pub n_x: usize,
    /// Grid points across the unit y-period; 1 or at least 3.
    pub n_y: usize,
    /// `None` picks `0.25 min(h_x / ‖b‖∞, h_x²)`. Either way the step is
    /// shortened to divide the unit time period.
    pub dt: Option<f64>,
    pub t_final: f64,
    pub front_level: f64,
    /// Trailing fraction of the run used by the speed fit.
    pub measure_window: f64,
    /// Switching this off leaves pure advection-diffusion.
    pub reaction: bool,
    /// Location of the initial step; `None` means `L / 2`.
    pub step_position: Option<f64>,
    pub sample_interval: f64,
    pub compensate_upwind: bool,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            shear: ShearSpec::zero(),
            fprime0: 1.0,
            domain_length: 200.0,
            n_x: 2000,
            n_y: 16,
            dt: None,
            t_final: 40.0,
            front_level: 0.5,
            measure_window: 0.5,
            reaction: true,
            step_position: None,
            sample_interval: 0.1,
            compensate_upwind: true,
        }
    }
}

impl OracleConfig {
    pub fn new(shear: ShearSpec) -> Self {
        OracleConfig {
            shear,
            ..Default::default()
        }
    }

    pub fn cell_width(&self) -> f64 {
        self.domain_length / (self.n_x - 1) as f64
    }

    pub fn step_at(&self) -> f64 {
        self.step_position.unwrap_or(0.5 * self.domain_length)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, reason: String| Err(Error::InvalidParameter { name, reason });
        if !(self.fprime0 > 0.0 && self.fprime0.is_finite()) {
            return bad("fprime0", format!("must be positive, got {}", self.fprime0));
        }
        if !(self.domain_length > 0.0 && self.domain_length.is_finite()) {
            return bad("domain_length", format!("must be positive, got {}", self.domain_length));
        }
        if self.n_x < 2 * BOUNDARY_MARGIN + 3 {
            return bad("n_x", format!("need at least {}, got {}", 2 * BOUNDARY_MARGIN + 3, self.n_x));
        }
        if self.n_y == 0 || self.n_y == 2 {
            return bad("n_y", format!("must be 1 or at least 3, got {}", self.n_y));
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return bad("dt", format!("must be positive, got {dt}"));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return bad("t_final", format!("must be positive, got {}", self.t_final));
        }
        if !(self.front_level > 0.0 && self.front_level < 1.0) {
            return bad("front_level", format!("must lie in (0, 1), got {}", self.front_level));
        }
        if !(self.measure_window > 0.0 && self.measure_window <= 1.0) {
            return bad("measure_window", format!("must lie in (0, 1], got {}", self.measure_window));
        }
        if !(self.sample_interval > 0.0 && self.sample_interval.is_finite()) {
            return bad("sample_interval", format!("must be positive, got {}", self.sample_interval));
        }
        let x0 = self.step_at();
        if !(x0 > 0.0 && x0 < self.domain_length) {
            return bad("step_position", format!("must lie inside (0, {}), got {x0}", self.domain_length));
        }
        if let ShearSpec::Tabulated { n_y, .. } = self.shear {
            if n_y != self.n_y {
                return Err(Error::DimensionMismatch {
                    expected: format!("{} y-points", self.n_y),
                    found: format!("tabulated shear with {n_y}"),
                });
            }
        }
        Ok(())
    }

    /// Explicit stability limit: upwind CFL `h_x / ‖b‖∞` and the reaction
    /// bound `1 / f'(0)`.
    fn stability_limit(&self, bmax: f64) -> f64 {
        let cfl = if bmax > 0.0 { self.cell_width() / bmax } else { f64::INFINITY };
        let react = if self.reaction { 1.0 / self.fprime0 } else { f64::INFINITY };
        cfl.min(react)
    }

    /// The time step actually used, after the period adjustment.
    pub fn resolved_dt(&self) -> Result<f64> {
        self.validate()?;
        let rows = ShearRows::new(&self.shear, self.n_y, BOUND_SAMPLES)?;
        let limit = self.stability_limit(rows.max_abs());
        let dt = match self.dt {
            Some(dt) if dt > limit => return Err(Error::Cfl { dt, limit }),
            Some(dt) => dt,
            None => {
                let h = self.cell_width();
                let cfl = if rows.max_abs() > 0.0 { h / rows.max_abs() } else { f64::INFINITY };
                (0.25 * cfl.min(h * h)).min(limit)
            }
        };
        Ok(1.0 / (1.0 / dt).ceil())
    }
}

/// Sampled front positions. Times start at 0 and increase strictly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrontTrace {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// `∫∫ u dx dy` at each sample; empty when not recorded.
    pub mass_history: Vec<f64>,
    /// Extremes of `u` over every step taken.
    pub min_u: f64,
    pub max_u: f64,
    pub dt: f64,
    pub cell_width: f64,
}

impl FrontTrace {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpeedEstimate {
    /// Signed; negative for a front moving toward `x = 0`.
    pub speed: f64,
    pub intercept: f64,
    pub samples: usize,
    pub rms_residual: f64,
    /// Positions stepped backwards by more than a cell inside the window.
    pub low_confidence: bool,
}

/// Shear values on the simulation y-nodes at each step of one time period.
struct ShearRows {
    n_y: usize,
    rows: Vec<f64>,
}

impl ShearRows {
    fn new(spec: &ShearSpec, n_y: usize, per_period: usize) -> Result<Self> {
        let mut rows = Vec::with_capacity(per_period * n_y);
        for k in 0..per_period {
            let tau = k as f64 / per_period as f64;
            for j in 0..n_y {
                let y = j as f64 / n_y as f64;
                let v = match spec {
                    ShearSpec::Tabulated { n_tau, values, .. } => {
                        let s = tau * *n_tau as f64;
                        let k0 = (s.floor() as usize) % n_tau;
                        let w = s - s.floor();
                        let k1 = (k0 + 1) % n_tau;
                        (1.0 - w) * values[k0 * n_y + j] + w * values[k1 * n_y + j]
                    }
                    _ => spec.value_at(y, tau).unwrap_or_default(),
                };
                if !v.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "shear",
                        reason: format!("non-finite value at y = {y}, τ = {tau}"),
                    });
                }
                rows.push(v);
            }
        }
        Ok(ShearRows { n_y, rows })
    }

    fn row(&self, step: usize) -> &[f64] {
        let per_period = self.rows.len() / self.n_y;
        let k = step % per_period;
        &self.rows[k * self.n_y..(k + 1) * self.n_y]
    }

    fn max_abs(&self) -> f64 {
        self.rows.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Constant-coefficient periodic solve of `(1 + 2r) u_j − r (u_{j−1} + u_{j+1}) = d_j`
/// applied row-wise, via Thomas plus a Sherman–Morrison correction.
struct PeriodicSolver {
    alpha: f64,
    gamma: f64,
    /// Thomas multipliers `c'_j` and pivots `1 / m_j` of the modified matrix.
    upper: Vec<f64>,
    inv_pivot: Vec<f64>,
    correction: Vec<f64>,
    factor: f64,
}

impl PeriodicSolver {
    fn new(n: usize, r: f64) -> Self {
        let alpha = -r;
        let beta = 1.0 + 2.0 * r;
        let gamma = -beta;
        let mut diag = vec![beta; n];
        diag[0] = beta - gamma;
        diag[n - 1] = beta - alpha * alpha / gamma;
        let mut upper = vec![0.0; n];
        let mut inv_pivot = vec![0.0; n];
        let mut prev = 0.0;
        for j in 0..n {
            let m = diag[j] - if j > 0 { alpha * prev } else { 0.0 };
            inv_pivot[j] = 1.0 / m;
            upper[j] = alpha / m;
            prev = upper[j];
        }
        let mut solver = PeriodicSolver {
            alpha,
            gamma,
            upper,
            inv_pivot,
            correction: Vec::new(),
            factor: 0.0,
        };
        let mut q = vec![0.0; n];
        q[0] = gamma;
        q[n - 1] = alpha;
        solver.thomas(&mut q, 1);
        solver.factor = 1.0 / (1.0 + q[0] + alpha / gamma * q[n - 1]);
        solver.correction = q;
        solver
    }

    /// Tridiagonal solve on rows of length `width` stored back to back.
    fn thomas(&self, d: &mut [f64], width: usize) {
        let n = self.upper.len();
        for i in 0..width {
            d[i] *= self.inv_pivot[0];
        }
        for j in 1..n {
            let (done, rest) = d.split_at_mut(j * width);
            let prev = &done[(j - 1) * width..];
            for (x, p) in rest[..width].iter_mut().zip(prev) {
                *x = (*x - self.alpha * p) * self.inv_pivot[j];
            }
        }
        for j in (0..n - 1).rev() {
            let (head, tail) = d.split_at_mut((j + 1) * width);
            let next = &tail[..width];
            for (x, nx) in head[j * width..].iter_mut().zip(next) {
                *x -= self.upper[j] * nx;
            }
        }
    }

    fn solve_rows(&self, d: &mut [f64], width: usize, scratch: &mut [f64]) {
        let n = self.upper.len();
        self.thomas(d, width);
        let ratio = self.alpha / self.gamma;
        for i in 0..width {
            scratch[i] = (d[i] + ratio * d[(n - 1) * width + i]) * self.factor;
        }
        for j in 0..n {
            let q = self.correction[j];
            for (x, s) in d[j * width..(j + 1) * width].iter_mut().zip(&scratch[..width]) {
                *x -= s * q;
            }
        }
    }
}

/// Implicit x-diffusion on one row: `(1 + 2r) u_i − r (u_{i−1} + u_{i+1}) = d_i`
/// for the interior, with the boundary values already in place.
fn diffuse_row(u: &mut [f64], r: f64, upper: &mut [f64]) {
    let n = u.len();
    let (left, right) = (u[0], u[n - 1]);
    let beta = 1.0 + 2.0 * r;
    // forward sweep over interior indices 1..n-1
    let mut prev_upper = 0.0;
    let mut prev_d = left;
    for i in 1..n - 1 {
        let (sub, prev) = if i == 1 { (0.0, 0.0) } else { (-r, prev_d) };
        let mut rhs = u[i];
        if i == 1 {
            rhs += r * left;
        }
        if i == n - 2 {
            rhs += r * right;
        }
        let m = beta - sub * prev_upper;
        upper[i] = -r / m;
        prev_d = (rhs - sub * prev) / m;
        u[i] = prev_d;
        prev_upper = upper[i];
    }
    for i in (1..n - 2).rev() {
        u[i] -= upper[i] * u[i + 1];
    }
}

/// Level crossing of `max_y u` scanning from `x = 0`, as a fractional cell index.
fn crossing(profile: &[f64], level: f64) -> Option<f64> {
    let i = profile.iter().position(|&m| m >= level)?;
    if i == 0 {
        return Some(0.0);
    }
    let (a, b) = (profile[i - 1], profile[i]);
    Some((i - 1) as f64 + (level - a) / (b - a))
}

/// Runs the simulation and samples the front every `sample_interval`.
pub fn evolve(config: &OracleConfig) -> Result<FrontTrace> {
    let dt = config.resolved_dt()?;
    let (n_x, n_y) = (config.n_x, config.n_y);
    let h = config.cell_width();
    let h_y = 1.0 / n_y as f64;
    let per_period = (1.0 / dt).round() as usize;
    let shear = ShearRows::new(&config.shear, n_y, per_period)?;
    let limit = config.stability_limit(shear.max_abs());
    if dt > limit {
        return Err(Error::Cfl { dt, limit });
    }
    let steps = (config.t_final / dt).round().max(1.0) as usize;
    let sample_every = ((config.sample_interval / dt).round() as usize).max(1);
    let y_solver = (n_y >= 3).then(|| PeriodicSolver::new(n_y, dt / (h_y * h_y)));
    log::debug!("oracle: dt {dt}, {steps} steps, h_x {h}, limit {limit}");

    // Step smoothed over a couple of cells.
    let x0 = config.step_at();
    let mut u = vec![0.0; n_x * n_y];
    for row in u.chunks_mut(n_x) {
        for (i, v) in row.iter_mut().enumerate() {
            let x = i as f64 * h;
            *v = 0.5 * (1.0 + ((x - x0) / (2.0 * h)).tanh());
        }
        row[0] = 0.0;
        row[n_x - 1] = 1.0;
    }

    let mut trace = FrontTrace {
        min_u: 0.0,
        max_u: 1.0,
        dt,
        cell_width: h,
        ..Default::default()
    };
    let mut profile = vec![0.0; n_x];
    let mut old = vec![0.0; n_x];
    let mut upper = vec![0.0; n_x];
    let mut scratch = vec![0.0; n_x];

    let mut record = |u: &[f64], time: f64, trace: &mut FrontTrace| -> Result<()> {
        profile.fill(f64::NEG_INFINITY);
        for row in u.chunks(n_x) {
            for (m, v) in profile.iter_mut().zip(row) {
                *m = m.max(*v);
            }
        }
        let cell = crossing(&profile, config.front_level).unwrap_or((n_x - 1) as f64);
        let position = cell * h;
        let lo = BOUNDARY_MARGIN as f64;
        let hi = (n_x - 1 - BOUNDARY_MARGIN) as f64;
        if cell < lo || cell > hi {
            return Err(Error::BoundaryContamination {
                time,
                position,
                partial: Box::new(trace.clone()),
            });
        }
        trace.times.push(time);
        trace.positions.push(position);
        trace.mass_history.push(u.iter().sum::<f64>() * h * h_y);
        Ok(())
    };
    record(&u, 0.0, &mut trace)?;

    let fprime0 = if config.reaction { config.fprime0 } else { 0.0 };
    for step in 0..steps {
        let b_row = shear.row(step);
        for (row, &b) in u.chunks_mut(n_x).zip(b_row) {
            if b != 0.0 {
                old.copy_from_slice(row);
                let nu = dt * b / h;
                if b > 0.0 {
                    for i in 1..n_x - 1 {
                        row[i] = old[i] + nu * (old[i + 1] - old[i]);
                    }
                } else {
                    for i in 1..n_x - 1 {
                        row[i] = old[i] + nu * (old[i] - old[i - 1]);
                    }
                }
            }
            if fprime0 != 0.0 {
                for v in row[1..n_x - 1].iter_mut() {
                    *v += dt * fprime0 * *v * (1.0 - *v);
                }
            }
            let mut diffusivity = 1.0;
            if config.compensate_upwind {
                diffusivity -= 0.5 * b.abs() * h - 0.5 * b * b * dt;
                diffusivity = diffusivity.max(0.0);
            }
            diffuse_row(row, dt * diffusivity / (h * h), &mut upper);
        }
        if let Some(solver) = &y_solver {
            solver.solve_rows(&mut u, n_x, &mut scratch);
        }

        let (lo, hi) = u.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        trace.min_u = trace.min_u.min(lo);
        trace.max_u = trace.max_u.max(hi);
        let time = (step + 1) as f64 * dt;
        if !(lo >= -BOUNDS_TOLERANCE && hi <= 1.0 + BOUNDS_TOLERANCE) {
            return Err(Error::BoundsViolated { time, min: lo, max: hi });
        }
        if (step + 1) % sample_every == 0 {
            record(&u, time, &mut trace)?;
        }
    }
    Ok(trace)
}

/// Least-squares slope of position against time over the trailing `window`
/// fraction of the trace.
pub fn estimate_speed(trace: &FrontTrace, window: f64) -> Result<SpeedEstimate> {
    fit_window(trace, window, |_| 0.0)
}

/// As [`estimate_speed`], after removing the logarithmic lag
/// `(3 / 2λ*) ln t` of fronts grown from step data.
pub fn estimate_speed_log_corrected(trace: &FrontTrace, window: f64, lambda_star: f64) -> Result<SpeedEstimate> {
    if !(lambda_star > 0.0 && lambda_star.is_finite()) {
        return Err(Error::Domain(lambda_star));
    }
    let lag = 1.5 / lambda_star;
    fit_window(trace, window, |t| lag * t.ln())
}

fn fit_window(trace: &FrontTrace, window: f64, lag: impl Fn(f64) -> f64) -> Result<SpeedEstimate> {
    if !(window > 0.0 && window <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "window",
            reason: format!("must lie in (0, 1], got {window}"),
        });
    }
    if trace.times.len() != trace.positions.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} positions", trace.times.len()),
            found: trace.positions.len().to_string(),
        });
    }
    let t_end = trace.times.last().copied().unwrap_or(0.0);
    let start = t_end * (1.0 - window);
    let pts: Vec<(f64, f64)> = trace
        .times
        .iter()
        .zip(&trace.positions)
        .filter(|(&t, _)| t >= start && t > 0.0)
        .map(|(&t, &p)| (t, p - lag(t)))
        .collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(Error::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            found: pts.len(),
        });
    }
    let (speed, intercept) = least_squares(&pts)?;
    let rms = (pts.iter().map(|&(t, p)| (p - speed * t - intercept).powi(2)).sum::<f64>() / pts.len() as f64).sqrt();
    let tol = if trace.cell_width > 0.0 { trace.cell_width } else { 0.0 };
    let low_confidence = pts.windows(2).any(|w| (w[1].1 - w[0].1) * speed.signum() < -tol);
    Ok(SpeedEstimate {
        speed,
        intercept,
        samples: pts.len(),
        rms_residual: rms,
        low_confidence,
    })
}

pub fn trace_to_csv(trace: &FrontTrace) -> String {
    let mut out = String::with_capacity(48 * (trace.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for (t, p) in trace.times.iter().zip(&trace.positions) {
        let _ = writeln!(out, "{},{}", format_float(*t), format_float(*p));
    }
    out
}

pub fn write_trace(trace: &FrontTrace, path: impl AsRef<Path>) -> Result<()> {
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    f.write_all(trace_to_csv(trace).as_bytes())?;
    f.flush()?;
    Ok(())
}
