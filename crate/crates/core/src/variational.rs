//! Minimization of `h(λ) = μ(λ)/λ` over `λ > 0`.
//!
//! `h` is strictly convex-like on `(0, ∞)` with a single interior minimum,
//! blowing up at both ends. The minimizer is a damped Newton iteration on
//! central differences with a golden-section fallback.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::eigen::{assemble, principal_eigenpair_with, EigenMethod, EigenPair};
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::grid::GridSpec;
use crate::shear::{ShearField, ShearSpec};

/// Cell means above this trigger a warning; the variational formula assumes
/// a mean-zero shear.
pub const MEAN_WARN_THRESHOLD: f64 = 1e-10;

const ARMIJO: f64 = 1e-4;
/// Rounding in `μ` is taken as this many ulps of `‖A‖∞`.
const NOISE_ULPS: f64 = 16.0;
const GOLDEN: f64 = 0.618_033_988_749_894_9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MinimizeOptions {
    /// Tolerance on the central-difference `|h'(λ)|`.
    pub grad_tol: f64,
    /// Tolerance on the last accepted `|Δλ|`.
    pub step_tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
    /// Starting point; `None` means `√f'(0)`.
    pub lambda0: Option<f64>,
    /// Bracket for the golden-section fallback.
    pub bracket: (f64, f64),
    pub method: EigenMethod,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        MinimizeOptions {
            grad_tol: 1e-8,
            step_tol: 1e-8,
            max_iter: 100,
            max_halvings: 30,
            lambda0: None,
            bracket: (1e-3, 50.0),
            method: EigenMethod::default(),
        }
    }
}

/// Outcome of [`minimize_h`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedResult {
    pub c_star: f64,
    pub lambda_star: f64,
    /// `μ(λ*)/λ* = −c*`.
    pub h_star: f64,
    pub iterations: usize,
    pub converged: bool,
    pub mu_at_star: f64,
    /// Central-difference `h'(λ*)`.
    pub gradient: f64,
    /// True when `|h'|` could not be pushed below `grad_tol` because the
    /// difference quotient had reached its rounding floor.
    pub noise_limited: bool,
    /// Eigen residual `max |Aφ − μφ|` at `λ*`.
    pub residual: f64,
    /// Largest `|μ − (λ² + f'(0) + λ⟨b⟩_φ)| / (1 + |μ|)` over every eigenpair
    /// computed during the minimization.
    pub max_identity_defect: f64,
    /// Number of eigenproblems solved.
    pub evaluations: usize,
    /// True when Newton gave up and the golden-section search finished.
    pub used_fallback: bool,
    /// Accepted `(λ, h)` iterates in order.
    pub history: Vec<(f64, f64)>,
    pub grid: GridSpec,
    pub shear: ShearSpec,
}

/// `h(λ) = μ(λ)/λ`.
pub fn h(field: &ShearField, grid: &GridSpec, lambda: f64, fprime0: f64) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain(lambda));
    }
    Ok(crate::eigen::mu_of_lambda(field, grid, lambda, fprime0)? / lambda)
}

/// `c*(0) − c*(δ) = −2√f'(0) − c*`, using the analytic zero-shear speed.
pub fn enhancement(result: &SpeedResult, fprime0: f64) -> f64 {
    -2.0 * fprime0.sqrt() - result.c_star
}

/// Evaluates eigenpairs and keeps the bookkeeping the result reports.
struct Objective<'a> {
    field: &'a ShearField,
    grid: &'a GridSpec,
    fprime0: f64,
    method: EigenMethod,
    /// `‖D‖∞` of the differential part.
    diff_norm: f64,
    evaluations: Cell<usize>,
    max_defect: Cell<f64>,
}

impl<'a> Objective<'a> {
    fn new(field: &'a ShearField, grid: &'a GridSpec, fprime0: f64, method: EigenMethod) -> Result<Self> {
        let d = crate::eigen::differential_part(grid)?;
        let diff_norm = d
            .row_iter()
            .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Objective {
            field,
            grid,
            fprime0,
            method,
            diff_norm,
            evaluations: Cell::new(0),
            max_defect: Cell::new(0.0),
        })
    }

    /// Size of `h'` that central differences cannot resolve at `λ`.
    fn gradient_floor(&self, lambda: f64) -> f64 {
        let potential = self.field.max_abs() * lambda + lambda * lambda + self.fprime0;
        let h_noise = NOISE_ULPS * f64::EPSILON * (self.diff_norm + potential) / lambda;
        h_noise / Self::fd_step(lambda).min(0.5 * lambda)
    }

    fn pair(&self, lambda: f64) -> Result<EigenPair> {
        let op = assemble(self.grid, self.field, lambda, self.fprime0)?;
        let pair = principal_eigenpair_with(&op, self.method)?;
        self.evaluations.set(self.evaluations.get() + 1);
        let defect = pair.identity_defect(&op) / (1.0 + pair.mu.abs());
        self.max_defect.set(self.max_defect.get().max(defect));
        Ok(pair)
    }

    /// `h(λ)`, with positivity failures mapped to `+∞` so that trial points in
    /// an under-resolved region are rejected instead of aborting the search.
    fn h(&self, lambda: f64) -> Result<f64> {
        if !(lambda > 0.0) {
            return Ok(f64::INFINITY);
        }
        match self.pair(lambda) {
            Ok(p) => Ok(p.mu / lambda),
            Err(Error::PositivityViolation { mu, min_entry }) => {
                log::debug!("rejecting λ = {lambda}: eigenvector min {min_entry:.3e} at μ = {mu}");
                Ok(f64::INFINITY)
            }
            Err(e) => Err(e),
        }
    }

    fn fd_step(lambda: f64) -> f64 {
        1e-5_f64.max(1e-5 * lambda)
    }

    /// Central first and second differences around `λ` given `h(λ)`.
    fn derivatives(&self, lambda: f64, h0: f64) -> Result<Option<(f64, f64)>> {
        let s = Self::fd_step(lambda).min(0.5 * lambda);
        let (hp, hm) = (self.h(lambda + s)?, self.h(lambda - s)?);
        if !hp.is_finite() || !hm.is_finite() {
            return Ok(None);
        }
        Ok(Some(((hp - hm) / (2.0 * s), (hp - 2.0 * h0 + hm) / (s * s))))
    }
}

/// Minimizes `h` and returns `c* = −min h` with its minimizer.
pub fn minimize_h(field: &ShearField, grid: &GridSpec, fprime0: f64, opts: &MinimizeOptions) -> Result<SpeedResult> {
    if !(fprime0 > 0.0 && fprime0.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "fprime0",
            reason: format!("must be positive and finite, got {fprime0}"),
        });
    }
    let (lo, hi) = opts.bracket;
    if !(lo > 0.0 && hi > lo) {
        return Err(Error::InvalidParameter {
            name: "bracket",
            reason: format!("need 0 < lo < hi, got ({lo}, {hi})"),
        });
    }
    let mean = field.mean_over_cell();
    if mean.abs() > MEAN_WARN_THRESHOLD {
        log::warn!("shear has nonzero cell mean {mean:.3e}; the speed is shifted by it");
    }
    let obj = Objective::new(field, grid, fprime0, opts.method)?;

    // Starting point, halved until the eigenvector is positive.
    let mut lambda = opts.lambda0.unwrap_or(fprime0.sqrt());
    if !(lambda > 0.0) {
        return Err(Error::Domain(lambda));
    }
    let mut h0 = obj.h(lambda)?;
    let mut halvings = 0;
    while !h0.is_finite() {
        if halvings == opts.max_halvings {
            // Surface the underlying positivity failure.
            obj.pair(lambda)?;
            return Err(Error::EigenSolver(format!("no admissible starting point below λ = {lambda}")));
        }
        lambda *= 0.5;
        h0 = obj.h(lambda)?;
        halvings += 1;
    }

    let mut history = vec![(lambda, h0)];
    let mut iterations = 0;
    let mut last_step = f64::INFINITY;
    let mut converged = false;
    let mut used_fallback = false;
    let mut gradient = f64::NAN;
    let mut noise_limited = false;

    while iterations < opts.max_iter {
        iterations += 1;
        let Some((g, curv)) = obj.derivatives(lambda, h0)? else {
            used_fallback = true;
            break;
        };
        gradient = g;
        let newton = if curv > 0.0 { -g / curv } else { f64::NAN };
        if g.abs() < opts.grad_tol && (last_step < opts.step_tol || newton.abs() < opts.step_tol) {
            converged = true;
            break;
        }
        if g.abs() <= obj.gradient_floor(lambda) {
            converged = true;
            noise_limited = true;
            break;
        }
        // Newton direction when the curvature is positive, otherwise a
        // scaled descent step; never cross λ = 0.
        let mut d = if newton.is_finite() { newton } else { -g.signum() * 0.5 * lambda };
        if lambda + d <= 0.0 {
            d = -0.5 * lambda;
        }
        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = lambda + t * d;
            let ht = obj.h(trial)?;
            if ht <= h0 + ARMIJO * t * g * d {
                accepted = Some((trial, ht));
                break;
            }
            t *= 0.5;
        }
        match accepted {
            Some((next, hn)) => {
                last_step = (next - lambda).abs();
                lambda = next;
                h0 = hn;
                history.push((lambda, h0));
                if last_step < opts.step_tol && newton.abs() < opts.step_tol {
                    // Step below the noise floor of the differences.
                    converged = true;
                    break;
                }
            }
            None if newton.abs() < opts.step_tol => {
                // Rounding prevents any decrease at this scale.
                converged = true;
                break;
            }
            None => {
                used_fallback = true;
                break;
            }
        }
    }

    if used_fallback {
        log::debug!("newton stalled at λ = {lambda}; switching to golden section on [{lo}, {hi}]");
        let (gl, gh, steps) = golden_section(&obj, lo, hi, opts.step_tol, opts.max_iter.max(200))?;
        iterations += steps;
        if gh < h0 {
            lambda = gl;
            h0 = gh;
            history.push((lambda, h0));
        }
        converged = true;
        if let Some((g, _)) = obj.derivatives(lambda, h0)? {
            gradient = g;
        }
    }

    if !converged {
        return Err(Error::NotConverged {
            iterations,
            best_lambda: lambda,
            best_h: h0,
        });
    }

    let pair = obj.pair(lambda)?;
    let h_star = pair.mu / lambda;
    Ok(SpeedResult {
        c_star: -h_star,
        lambda_star: lambda,
        h_star,
        iterations,
        converged,
        mu_at_star: pair.mu,
        gradient,
        noise_limited,
        residual: pair.residual,
        max_identity_defect: obj.max_defect.get(),
        evaluations: obj.evaluations.get(),
        used_fallback,
        history,
        grid: *grid,
        shear: field.source().clone(),
    })
}

/// Golden-section search on `[lo, hi]`; returns `(λ, h, iterations)`.
fn golden_section(obj: &Objective, mut lo: f64, mut hi: f64, tol: f64, max_iter: usize) -> Result<(f64, f64, usize)> {
    let mut x1 = hi - GOLDEN * (hi - lo);
    let mut x2 = lo + GOLDEN * (hi - lo);
    let mut f1 = obj.h(x1)?;
    let mut f2 = obj.h(x2)?;
    let mut k = 0;
    while hi - lo > tol * (1.0 + x1.abs()) && k < max_iter {
        k += 1;
        if f1 <= f2 {
            hi = x2;
            (x2, f2) = (x1, f1);
            x1 = hi - GOLDEN * (hi - lo);
            f1 = obj.h(x1)?;
        } else {
            lo = x1;
            (x1, f1) = (x2, f2);
            x2 = lo + GOLDEN * (hi - lo);
            f2 = obj.h(x2)?;
        }
    }
    Ok(if f1 <= f2 { (x1, f1, k) } else { (x2, f2, k) })
}

/// One sample of the eigenvalue curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub lambda: f64,
    pub mu: f64,
    pub h: f64,
    /// Relative identity defect `|μ − (λ² + f'(0) + λ⟨b⟩_φ)| / (1 + |μ|)`.
    pub identity_defect: f64,
}

/// Samples `μ(λ)` and `h(λ)` at each `λ`, in order.
pub fn scan_h(
    field: &ShearField,
    grid: &GridSpec,
    fprime0: f64,
    lambdas: &[f64],
    method: EigenMethod,
    execution: Execution,
) -> Result<Vec<CurvePoint>> {
    exec::map(execution, lambdas, |&lambda| {
        if !(lambda > 0.0) {
            return Err(Error::Domain(lambda));
        }
        let op = assemble(grid, field, lambda, fprime0)?;
        let pair = principal_eigenpair_with(&op, method)?;
        Ok(CurvePoint {
            lambda,
            mu: pair.mu,
            h: pair.mu / lambda,
            identity_defect: pair.identity_defect(&op) / (1.0 + pair.mu.abs()),
        })
    })
    .into_iter()
    .collect()
}

/// `steps` points from `lo` to `hi` inclusive, evenly spaced.
pub fn linspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    match steps {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..steps)
            .map(|i| if i + 1 == steps { hi } else { lo + (hi - lo) * i as f64 / (steps - 1) as f64 })
            .collect(),
    }
}

/// `steps` points from `lo` to `hi` inclusive, evenly spaced in `ln λ`.
pub fn logspace(lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    linspace(lo.ln(), hi.ln(), steps)
        .into_iter()
        .enumerate()
        .map(|(i, x)| match i {
            0 => lo,
            _ if i + 1 == steps => hi,
            _ => x.exp(),
        })
        .collect()
}

/// Number of sign changes in the discrete slope of `values`, ignoring
/// differences with magnitude at most `tol`.
pub fn slope_sign_changes(values: &[f64], tol: f64) -> usize {
    let signs: Vec<f64> = values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|d| d.abs() > tol)
        .map(f64::signum)
        .collect();
    signs.windows(2).filter(|s| s[0] != s[1]).count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero(n: usize) -> (GridSpec, ShearField) {
        let g = GridSpec::square(n).unwrap();
        (g, ShearField::zero(g))
    }

    #[test]
    fn h_closed_form_without_shear() {
        let (g, z) = zero(8);
        assert!((h(&z, &g, 1.0, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert!((h(&z, &g, 2.0, 1.0).unwrap() - 2.5).abs() < 1e-12);
    }

    #[test]
    fn h_rejects_nonpositive_lambda() {
        let (g, z) = zero(8);
        assert!(matches!(h(&z, &g, 0.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(h(&z, &g, -1.0, 1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn baseline_speeds() {
        let (g, z) = zero(8);
        for fp in [0.25, 1.0, 4.0] {
            let r = minimize_h(&z, &g, fp, &MinimizeOptions::default()).unwrap();
            assert!(r.converged);
            assert!((r.c_star + 2.0 * fp.sqrt()).abs() < 1e-8, "{r:?}");
            assert!((r.lambda_star - fp.sqrt()).abs() < 1e-6);
            assert!(enhancement(&r, fp).abs() < 1e-8);
        }
    }

    #[test]
    fn start_away_from_minimum() {
        let (g, z) = zero(8);
        for l0 in [0.01, 0.2, 7.0, 40.0] {
            let opts = MinimizeOptions {
                lambda0: Some(l0),
                ..Default::default()
            };
            let r = minimize_h(&z, &g, 1.0, &opts).unwrap();
            assert!((r.c_star + 2.0).abs() < 1e-8, "λ0 = {l0}: {r:?}");
            assert!(r.history.windows(2).all(|w| w[1].1 <= w[0].1));
        }
    }

    #[test]
    fn rejects_bad_fprime() {
        let (g, z) = zero(8);
        assert!(minimize_h(&z, &g, 0.0, &MinimizeOptions::default()).is_err());
        assert!(minimize_h(&z, &g, f64::NAN, &MinimizeOptions::default()).is_err());
    }

    #[test]
    fn golden_section_finds_baseline_minimum() {
        let (g, z) = zero(8);
        let obj = Objective::new(&z, &g, 4.0, EigenMethod::ShiftInvert).unwrap();
        let (l, hv, steps) = golden_section(&obj, 1e-3, 50.0, 1e-10, 500).unwrap();
        assert!((l - 2.0).abs() < 1e-4, "{l}");
        assert!((hv - 4.0).abs() < 1e-8);
        assert!(steps > 10 && obj.evaluations.get() == steps + 2);
    }

    #[test]
    fn spacing_helpers() {
        assert_eq!(linspace(0.0, 1.0, 3), vec![0.0, 0.5, 1.0]);
        let l = logspace(0.05, 5.0, 60);
        assert_eq!((l[0], l[59]), (0.05, 5.0));
        assert!((l[1] / l[0] - l[59] / l[58]).abs() < 1e-12);
        assert_eq!(slope_sign_changes(&[3.0, 2.0, 1.0, 2.0, 3.0], 0.0), 1);
        assert_eq!(slope_sign_changes(&[1.0, 2.0, 1.0, 2.0], 0.0), 2);
        assert_eq!(slope_sign_changes(&[1.0, 1.0, 1.0], 1e-9), 0);
    }
}
