//! Discretized periodic-parabolic operators and their principal eigenpairs.
//!
//! The growth operator is
//!
//! ```text
//! A = (I_τ ⊗ D²_y) − (D_τ ⊗ I_y) + diag(λ² + f'(0) + λ b)
//! ```
//!
//! and the auxiliary operator replaces the diagonal by `λ (b + c)`.
//!
//! The principal eigenvalue is the real eigenvalue carrying a positive
//! eigenvector. It is *not* the eigenvalue of largest real part of the
//! discrete matrix: every eigenvalue `μ` of the continuous problem comes with
//! Floquet copies `μ − 2πik` on the same vertical line, and near the τ-Nyquist
//! frequency the collocation copies drift to the right of `μ`. Selection
//! therefore goes through the real spectrum and positivity is verified.
//!
//! With an even number of τ nodes the first-derivative matrix also
//! annihilates the alternating vector, so each mode has a τ-Nyquist twin. A
//! shear that varies in τ can couple the principal mode to its twin and
//! split it into a conjugate pair a tiny distance off the real axis. Such a
//! pair is accepted as the principal eigenvalue and reported through its
//! real part.

use faer::linalg::solvers::{PartialPivLu, Solve};
use std::f64::consts::PI;

use faer::{c64, Mat};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{first_derivative_matrix, second_derivative_matrix, GridSpec};
use crate::shear::ShearField;

/// Smallest admissible entry of a unit-sum principal eigenvector.
pub const POSITIVITY_FLOOR: f64 = 1e-12;

/// Imaginary parts below this (relative to `1 + |re|`) count as real.
pub const REAL_TOLERANCE: f64 = 1e-8;

const KRYLOV_DIM: usize = 30;
const MAX_KRYLOV_DIM: usize = 120;
const MAX_REFINE_STEPS: usize = 200;
/// Distance of the refinement shift above the eigenvalue estimate. Each
/// solve amplifies rounding by about `‖A‖ / REFINE_OFFSET` along directions
/// sharing the eigenvalue (the τ-Nyquist twin of a τ-independent mode), so
/// the offset is kept well away from zero.
const REFINE_OFFSET: f64 = 0.5;
/// Floor for the shift when the next real eigenvalue is close.
const MIN_REFINE_OFFSET: f64 = 1e-3;
const RETRY_SHRINK: f64 = 16.0;
const RETRY_SHRINK_STEPS: usize = 3;
/// Fraction of the Floquet spacing below which a conjugate pair is treated
/// as a split real eigenvalue.
const NEAR_REAL_FRACTION: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorKind {
    /// Diagonal `λ² + f'(0) + λ b`; eigenvalue `μ(λ)`.
    Growth { lambda: f64, fprime0: f64 },
    /// Diagonal `λ (b + c)`; eigenvalue `ρ_c(λ)`.
    Auxiliary { lambda: f64, c: f64 },
}

/// Dense discretized operator together with its potential (diagonal) term.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    entries: Mat<f64>,
    potential: Vec<f64>,
    kind: OperatorKind,
    grid: GridSpec,
}

impl OperatorMatrix {
    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    /// The multiplicative term added on the diagonal.
    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn lambda(&self) -> f64 {
        match self.kind {
            OperatorKind::Growth { lambda, .. } | OperatorKind::Auxiliary { lambda, .. } => lambda,
        }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.potential.len()
    }

    pub fn is_empty(&self) -> bool {
        self.potential.is_empty()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        matvec(&self.entries, v)
    }
}

/// `(I_τ ⊗ D²_y) − (D_τ ⊗ I_y)` in the flat layout of [`GridSpec`].
pub fn differential_part(grid: &GridSpec) -> Result<Mat<f64>> {
    let (n_y, n_tau) = (grid.n_y(), grid.n_tau());
    let d2y = second_derivative_matrix(n_y, grid.period_y())?;
    let dtau = first_derivative_matrix(n_tau, grid.period_tau())?;
    let n = grid.len();
    let mut a = Mat::<f64>::zeros(n, n);
    for t in 0..n_tau {
        let base = t * n_y;
        for i in 0..n_y {
            for j in 0..n_y {
                a[(base + i, base + j)] += d2y.get(i, j);
            }
        }
    }
    for t in 0..n_tau {
        for s in 0..n_tau {
            let w = dtau.get(t, s);
            if w == 0.0 {
                continue;
            }
            for i in 0..n_y {
                a[(t * n_y + i, s * n_y + i)] -= w;
            }
        }
    }
    Ok(a)
}

fn check_field(grid: &GridSpec, field: &ShearField) -> Result<()> {
    if field.grid() != grid {
        return Err(Error::DimensionMismatch {
            expected: format!("shear on grid {grid}"),
            found: format!("shear on grid {}", field.grid()),
        });
    }
    Ok(())
}

fn check_finite(name: &'static str, x: f64) -> Result<()> {
    if !x.is_finite() {
        return Err(Error::InvalidParameter {
            name,
            reason: format!("must be finite, got {x}"),
        });
    }
    Ok(())
}

fn with_potential(grid: &GridSpec, potential: Vec<f64>, kind: OperatorKind) -> Result<OperatorMatrix> {
    let mut entries = differential_part(grid)?;
    for (i, p) in potential.iter().enumerate() {
        entries[(i, i)] += p;
    }
    Ok(OperatorMatrix {
        entries,
        potential,
        kind,
        grid: *grid,
    })
}

/// Assembles `A = (I ⊗ D²_y) − (D_τ ⊗ I) + diag(λ² + f'(0) + λ b)`.
pub fn assemble(grid: &GridSpec, field: &ShearField, lambda: f64, fprime0: f64) -> Result<OperatorMatrix> {
    check_field(grid, field)?;
    check_finite("lambda", lambda)?;
    if !(fprime0.is_finite() && fprime0 > 0.0) {
        return Err(Error::InvalidParameter {
            name: "fprime0",
            reason: format!("must be positive, got {fprime0}"),
        });
    }
    let shift = lambda * lambda + fprime0;
    let potential = field.values().iter().map(|b| shift + lambda * b).collect();
    with_potential(grid, potential, OperatorKind::Growth { lambda, fprime0 })
}

/// Assembles the auxiliary operator with diagonal `λ (b + c)`.
pub fn assemble_auxiliary(grid: &GridSpec, field: &ShearField, lambda: f64, c: f64) -> Result<OperatorMatrix> {
    check_field(grid, field)?;
    check_finite("lambda", lambda)?;
    check_finite("c", c)?;
    let potential = field.values().iter().map(|b| lambda * (b + c)).collect();
    with_potential(grid, potential, OperatorKind::Auxiliary { lambda, c })
}

/// Principal eigenvalue with its positive eigenvector.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenPair {
    pub mu: f64,
    /// Imaginary part of the selected eigenvalue. Zero unless the τ-Nyquist
    /// twin has split the principal eigenvalue into a nearly real conjugate
    /// pair, in which case `mu` is the common real part.
    pub imaginary: f64,
    /// Strictly positive, normalized to unit sum.
    pub vector: Vec<f64>,
    /// `max |A v − μ v|` for the unit-sum (possibly complex) eigenvector.
    pub residual: f64,
    /// Distance from `μ` down to the next distinct near-real eigenvalue,
    /// when the solver resolved one.
    pub spectral_gap: Option<f64>,
}

impl EigenPair {
    /// `Σ w_i φ_i / Σ φ_i`, the eigenvector-weighted mean of `w`.
    pub fn weighted_mean(&self, w: &[f64]) -> f64 {
        let num: f64 = self.vector.iter().zip(w).map(|(p, w)| p * w).sum();
        num / self.vector.iter().sum::<f64>()
    }

    /// `|μ − Σ p_i φ_i / Σ φ_i|` where `p` is the operator's potential.
    ///
    /// Both differentiation blocks have zero column sums, so summing the rows
    /// of `A φ = μ φ` leaves exactly this identity. For a split pair the
    /// complex eigenvector is phased so that its sum is real, which keeps the
    /// identity exact for the real parts.
    pub fn identity_defect(&self, op: &OperatorMatrix) -> f64 {
        (self.mu - self.weighted_mean(op.potential())).abs()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EigenMethod {
    /// Arnoldi on `(σ − A)^{-1}` followed by shifted inverse iteration.
    #[default]
    ShiftInvert,
    /// Full dense spectrum, then inverse iteration on the selected value.
    Dense,
}

pub fn principal_eigenpair(op: &OperatorMatrix) -> Result<EigenPair> {
    principal_eigenpair_with(op, EigenMethod::default())
}

pub fn principal_eigenpair_with(op: &OperatorMatrix, method: EigenMethod) -> Result<EigenPair> {
    let candidates = match method {
        EigenMethod::ShiftInvert => shift_invert_candidates(op)?,
        EigenMethod::Dense => dense_candidates(op)?,
    };
    let Some(&guess) = candidates.first() else {
        unreachable!("candidate lists are non-empty or error out");
    };
    let mut offset = gap_below(&candidates, guess.re)
        .map_or(REFINE_OFFSET, |g| (0.25 * g).clamp(MIN_REFINE_OFFSET, REFINE_OFFSET));
    let accept = |r: &Refined| r.residual < 1e-8 * (1.0 + r.mu.abs());
    let mut found = refine_any(op, guess, offset)?;
    // A cluster the candidate list missed slows the iteration; move the shift in.
    for _ in 0..RETRY_SHRINK_STEPS {
        if accept(&found) {
            break;
        }
        offset /= RETRY_SHRINK;
        let retry = refine_any(op, c64::new(found.mu, guess.im), offset)?;
        if retry.residual < found.residual {
            found = retry;
        }
    }
    let (mu, vector) = (found.mu, found.vector);
    let min_entry = vector.iter().copied().fold(f64::INFINITY, f64::min);
    if !(min_entry >= POSITIVITY_FLOOR) {
        return Err(Error::PositivityViolation { mu, min_entry });
    }
    if !(found.residual < 1e-8 * (1.0 + mu.abs())) {
        return Err(Error::EigenSolver(format!(
            "inverse iteration stalled with residual {:.3e} at mu = {mu}",
            found.residual
        )));
    }
    Ok(EigenPair {
        mu,
        imaginary: found.imaginary,
        vector,
        residual: found.residual,
        spectral_gap: gap_below(&candidates, mu),
    })
}

/// Principal eigenvalue `μ(λ)` of the growth operator.
pub fn mu_of_lambda(field: &ShearField, grid: &GridSpec, lambda: f64, fprime0: f64) -> Result<f64> {
    Ok(principal_eigenpair(&assemble(grid, field, lambda, fprime0)?)?.mu)
}

/// Principal eigenvalue `ρ_c(λ)` of the auxiliary operator.
pub fn rho_c(field: &ShearField, grid: &GridSpec, lambda: f64, c: f64) -> Result<f64> {
    Ok(principal_eigenpair(&assemble_auxiliary(grid, field, lambda, c)?)?.mu)
}

/// All eigenvalues of the dense operator.
pub fn spectrum(op: &OperatorMatrix) -> Result<Vec<c64>> {
    op.entries
        .eigenvalues()
        .map_err(|e| Error::EigenSolver(format!("{e:?}")))
}

fn is_real(z: c64) -> bool {
    z.im.abs() <= REAL_TOLERANCE * (1.0 + z.re.abs())
}

/// Real, or split off the real axis by much less than the Floquet spacing
/// `2π / period_τ` that separates genuinely complex copies.
fn is_near_real(z: c64, grid: &GridSpec) -> bool {
    is_real(z) || z.im.abs() <= NEAR_REAL_FRACTION * 2.0 * PI / grid.period_tau()
}

fn gap_below(candidates: &[c64], mu: f64) -> Option<f64> {
    let distinct = REAL_TOLERANCE * (1.0 + mu.abs());
    candidates
        .iter()
        .filter(|nu| nu.re < mu - distinct)
        .map(|nu| mu - nu.re)
        .reduce(f64::min)
}

/// Keeps near-real values (one per conjugate pair), largest real part first.
fn select_candidates(eigs: impl IntoIterator<Item = c64>, grid: &GridSpec) -> Result<Vec<c64>> {
    let mut top: Option<c64> = None;
    let mut kept = Vec::new();
    for z in eigs {
        if top.is_none_or(|t| z.re > t.re) {
            top = Some(z);
        }
        if is_near_real(z, grid) && (z.im >= 0.0 || is_real(z)) {
            kept.push(if is_real(z) { c64::new(z.re, 0.0) } else { z });
        }
    }
    if kept.is_empty() {
        let top = top.unwrap_or(c64::new(f64::NAN, f64::NAN));
        return Err(Error::ComplexPrincipal { re: top.re, im: top.im });
    }
    kept.sort_by(|a, b| b.re.total_cmp(&a.re));
    Ok(kept)
}

fn dense_candidates(op: &OperatorMatrix) -> Result<Vec<c64>> {
    select_candidates(spectrum(op)?, &op.grid)
}

/// Arnoldi with a growing Krylov space, then the dense spectrum as a last resort.
fn shift_invert_candidates(op: &OperatorMatrix) -> Result<Vec<c64>> {
    // Re(spectrum) is bounded by the top of the symmetric part, and D²_y ≤ 0.
    let sigma = op.potential.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0;
    let lu = shifted_lu(&op.entries, sigma);
    let mut m = KRYLOV_DIM;
    loop {
        let ritz = arnoldi_ritz_values(op, &lu, sigma, m.min(op.len()))?;
        match select_candidates(ritz, &op.grid) {
            Err(Error::ComplexPrincipal { .. }) if m < MAX_KRYLOV_DIM && m < op.len() => m *= 2,
            Err(Error::ComplexPrincipal { .. }) => {
                log::debug!("no converged near-real Ritz value; falling back to the dense spectrum");
                return dense_candidates(op);
            }
            found => return found,
        }
    }
}

/// Converged Ritz values of `(σ − A)^{-1}` mapped back to eigenvalues of `A`.
/// `σ` sits above every real part.
fn arnoldi_ritz_values(op: &OperatorMatrix, lu: &PartialPivLu<f64>, sigma: f64, m: usize) -> Result<Vec<c64>> {
    let n = op.len();

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
    let mut hess = Mat::<f64>::zeros(m + 1, m);
    let start = 1.0 / (n as f64).sqrt();
    basis.push(vec![start; n]);
    let mut dim = m;
    let mut tail = 0.0;
    for j in 0..m {
        let mut w = solve(lu, &basis[j]);
        let norm0 = norm2(&w);
        for _ in 0..2 {
            for (i, q) in basis.iter().enumerate() {
                let h = dot(q, &w);
                hess[(i, j)] += h;
                axpy(-h, q, &mut w);
            }
        }
        let beta = norm2(&w);
        if beta <= 1e-13 * norm0 {
            dim = j + 1;
            tail = 0.0;
            break;
        }
        tail = beta;
        if j + 1 < m {
            hess[(j + 1, j)] = beta;
        }
        w.iter_mut().for_each(|x| *x /= beta);
        basis.push(w);
    }

    let small = Mat::from_fn(dim, dim, |i, j| hess[(i, j)]);
    let evd = small
        .eigen()
        .map_err(|e| Error::EigenSolver(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let mut values = Vec::new();
    for k in 0..dim {
        let theta = s[k];
        if theta.norm() == 0.0 {
            continue;
        }
        let y_norm: f64 = (0..dim).map(|i| u[(i, k)].norm_sqr()).sum::<f64>().sqrt();
        let ritz_res = tail * u[(dim - 1, k)].norm() / y_norm;
        if ritz_res <= 1e-6 * theta.norm() {
            values.push(c64::new(sigma, 0.0) - c64::new(1.0, 0.0) / theta);
        }
    }
    Ok(values)
}

/// Output of the refinement stage.
struct Refined {
    mu: f64,
    imaginary: f64,
    /// Unit sum.
    vector: Vec<f64>,
    residual: f64,
}

fn row_sum_norm(a: &Mat<f64>) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn refine_any(op: &OperatorMatrix, guess: c64, offset: f64) -> Result<Refined> {
    if is_real(guess) {
        refine(op, guess.re, offset)
    } else {
        refine_pair(op, guess.re, offset)
    }
}

/// Inverse iteration at a shift above `guess`, starting from the constant
/// vector, with the Rayleigh quotient as the eigenvalue.
fn refine(op: &OperatorMatrix, guess: f64, offset: f64) -> Result<Refined> {
    let n = op.len();
    let lu = shifted_lu(&op.entries, guess + offset);
    let scale = row_sum_norm(&op.entries);

    let mut v = vec![1.0 / (n as f64).sqrt(); n];
    let mut mu = guess;
    for step in 0..MAX_REFINE_STEPS {
        let mut w = solve(&lu, &v);
        let norm = norm2(&w);
        if !norm.is_finite() || norm == 0.0 {
            return Err(Error::EigenSolver("inverse iteration broke down".into()));
        }
        w.iter_mut().for_each(|x| *x /= norm);
        let aw = op.apply(&w);
        let next = dot(&w, &aw);
        let resid = aw.iter().zip(&w).map(|(a, x)| (a - next * x).abs()).fold(0.0, f64::max);
        v = w;
        mu = next;
        if step > 0 && resid <= 8.0 * f64::EPSILON * scale * max_abs(&v) {
            break;
        }
    }
    let vector = normalize_positive(v);
    let residual = max_abs(&op.apply(&vector).iter().zip(&vector).map(|(a, v)| a - mu * v).collect::<Vec<_>>());
    Ok(Refined {
        mu,
        imaginary: 0.0,
        vector,
        residual,
    })
}

/// Two-vector subspace iteration for a nearly real conjugate pair. The
/// start block is the constant vector and its τ-alternating twin.
fn refine_pair(op: &OperatorMatrix, guess: f64, offset: f64) -> Result<Refined> {
    let n = op.len();
    let n_y = op.grid.n_y();
    let lu = shifted_lu(&op.entries, guess + offset);
    let scale = row_sum_norm(&op.entries);

    let mut v0 = vec![1.0; n];
    let mut v1: Vec<f64> = (0..n).map(|k| if (k / n_y) % 2 == 0 { 1.0 } else { -1.0 }).collect();
    orthonormalize(&mut v0, &mut v1)?;
    let mut h = [[0.0; 2]; 2];
    for step in 0..MAX_REFINE_STEPS {
        let mut w0 = solve(&lu, &v0);
        let mut w1 = solve(&lu, &v1);
        orthonormalize(&mut w0, &mut w1)?;
        (v0, v1) = (w0, w1);
        let (a0, a1) = (op.apply(&v0), op.apply(&v1));
        h = [[dot(&v0, &a0), dot(&v0, &a1)], [dot(&v1, &a0), dot(&v1, &a1)]];
        let resid = (0..n)
            .map(|i| {
                let r0 = a0[i] - v0[i] * h[0][0] - v1[i] * h[1][0];
                let r1 = a1[i] - v0[i] * h[0][1] - v1[i] * h[1][1];
                r0.abs().max(r1.abs())
            })
            .fold(0.0, f64::max);
        if step > 0 && resid <= 8.0 * f64::EPSILON * scale {
            break;
        }
    }

    let half_trace = 0.5 * (h[0][0] + h[1][1]);
    let disc = (0.5 * (h[0][0] - h[1][1])).powi(2) + h[0][1] * h[1][0];
    if disc >= 0.0 {
        // The pair resolved into two real eigenvalues; take the larger.
        return refine(op, half_trace + disc.sqrt(), offset);
    }
    let nu = c64::new(half_trace, (-disc).sqrt());
    // Eigenvector of the 2x2 block, lifted through the basis.
    let y = if h[0][1].abs() >= h[1][0].abs() {
        [c64::new(h[0][1], 0.0), nu - h[0][0]]
    } else {
        [nu - h[1][1], c64::new(h[1][0], 0.0)]
    };
    let mut z: Vec<c64> = (0..n).map(|i| y[0] * v0[i] + y[1] * v1[i]).collect();
    // Phase so that Σ z is real and positive, then scale to unit sum.
    let total: c64 = z.iter().copied().sum();
    if total.norm() == 0.0 {
        return Err(Error::EigenSolver("split pair has a zero-sum eigenvector".into()));
    }
    let unit = c64::new(1.0, 0.0) / total;
    z.iter_mut().for_each(|x| *x *= unit);
    let re: Vec<f64> = z.iter().map(|x| x.re).collect();
    let im: Vec<f64> = z.iter().map(|x| x.im).collect();
    let (are, aim) = (op.apply(&re), op.apply(&im));
    let residual = (0..n)
        .map(|i| {
            let r = c64::new(are[i], aim[i]) - nu * z[i];
            r.norm()
        })
        .fold(0.0, f64::max);
    Ok(Refined {
        mu: nu.re,
        imaginary: nu.im,
        vector: re,
        residual,
    })
}

fn orthonormalize(a: &mut [f64], b: &mut [f64]) -> Result<()> {
    let na = norm2(a);
    if !(na > 0.0 && na.is_finite()) {
        return Err(Error::EigenSolver("subspace iteration broke down".into()));
    }
    a.iter_mut().for_each(|x| *x /= na);
    for _ in 0..2 {
        let p = dot(a, b);
        axpy(-p, a, b);
    }
    let nb = norm2(b);
    if !(nb > 0.0 && nb.is_finite()) {
        return Err(Error::EigenSolver("subspace iteration broke down".into()));
    }
    b.iter_mut().for_each(|x| *x /= nb);
    Ok(())
}

fn shifted_lu(a: &Mat<f64>, sigma: f64) -> PartialPivLu<f64> {
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| if i == j { sigma - a[(i, j)] } else { -a[(i, j)] });
    shifted.partial_piv_lu()
}

fn solve(lu: &PartialPivLu<f64>, rhs: &[f64]) -> Vec<f64> {
    let mut x = Mat::from_fn(rhs.len(), 1, |i, _| rhs[i]);
    lu.solve_in_place(&mut x);
    x.col_as_slice(0).to_vec()
}

/// Flips sign so the largest-magnitude entry is positive, then scales to unit sum.
fn normalize_positive(mut v: Vec<f64>) -> Vec<f64> {
    let pivot = v
        .iter()
        .copied()
        .max_by(|a, b| a.abs().total_cmp(&b.abs()))
        .unwrap_or(1.0);
    if pivot < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    let sum: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= sum);
    v
}

pub(crate) fn matvec(a: &Mat<f64>, v: &[f64]) -> Vec<f64> {
    let n = a.nrows();
    let mut out = vec![0.0; n];
    for j in 0..a.ncols() {
        let vj = v[j];
        if vj == 0.0 {
            continue;
        }
        for (o, aij) in out.iter_mut().zip(a.col_as_slice(j)) {
            *o += aij * vj;
        }
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

fn max_abs(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, x| m.max(x.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::shear::ShearSpec;

    fn field(n: usize, delta: f64, freq: u32) -> (GridSpec, ShearField) {
        let g = GridSpec::square(n).unwrap();
        let f = ShearSpec::parametric(delta, freq).sample(&g).unwrap();
        (g, f)
    }

    #[test]
    fn lambda_zero_drops_shear() {
        let (g, f) = field(8, 1.3, 2);
        let a = assemble(&g, &f, 0.0, 1.0).unwrap();
        let z = assemble(&g, &ShearField::zero(g), 0.0, 1.0).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                assert_eq!(a.entries()[(i, j)], z.entries()[(i, j)]);
            }
        }
    }

    #[test]
    fn zero_shear_diagonal_shift() {
        let g = GridSpec::square(8).unwrap();
        let a = assemble(&g, &ShearField::zero(g), 1.0, 1.0).unwrap();
        let d = differential_part(&g).unwrap();
        for i in 0..g.len() {
            for j in 0..g.len() {
                let expect = d[(i, j)] + if i == j { 2.0 } else { 0.0 };
                assert_eq!(a.entries()[(i, j)], expect);
            }
        }
    }

    #[test]
    fn differential_part_annihilates_constants() {
        let g = GridSpec::unit(8, 6).unwrap();
        let d = differential_part(&g).unwrap();
        let out = matvec(&d, &vec![1.0; g.len()]);
        assert!(max_abs(&out) < 1e-10);
        // zero column sums as well
        for j in 0..g.len() {
            let s: f64 = (0..g.len()).map(|i| d[(i, j)]).sum();
            assert!(s.abs() < 1e-10);
        }
    }

    #[test]
    fn kronecker_layout_on_separable_function() {
        use std::f64::consts::PI;
        // u(y, τ) = sin(2πy) cos(2πτ): A0 u = (−4π² sin cos) + 2π sin sin
        let g = GridSpec::unit(4, 8).unwrap();
        let d = differential_part(&g).unwrap();
        let mut u = vec![0.0; g.len()];
        let mut expect = vec![0.0; g.len()];
        for k in 0..g.len() {
            let (y, t) = g.point(k).unwrap();
            let (sy, ct, st) = ((2.0 * PI * y).sin(), (2.0 * PI * t).cos(), (2.0 * PI * t).sin());
            u[k] = sy * ct;
            expect[k] = -4.0 * PI * PI * sy * ct + 2.0 * PI * sy * st;
        }
        let got = matvec(&d, &u);
        for (a, b) in got.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_mismatched_grid_and_bad_fprime() {
        let (_, f) = field(8, 1.0, 1);
        let other = GridSpec::square(16).unwrap();
        assert!(matches!(assemble(&other, &f, 1.0, 1.0), Err(Error::DimensionMismatch { .. })));
        let g = *f.grid();
        assert!(assemble(&g, &f, 1.0, 0.0).is_err());
        assert!(assemble(&g, &f, f64::NAN, 1.0).is_err());
    }

    #[test]
    fn zero_shear_principal_is_constant() {
        for n in [8, 16] {
            let g = GridSpec::square(n).unwrap();
            let op = assemble(&g, &ShearField::zero(g), 1.0, 1.0).unwrap();
            for method in [EigenMethod::ShiftInvert, EigenMethod::Dense] {
                let pair = principal_eigenpair_with(&op, method).unwrap();
                assert!((pair.mu - 2.0).abs() < 1e-12, "{method:?}: {}", pair.mu);
                let c = 1.0 / g.len() as f64;
                let dev = pair.vector.iter().map(|v| (v - c).abs()).fold(0.0, f64::max);
                assert!(dev < 1e-12 * c, "{method:?} n={n} dev={dev:e}");
            }
        }
    }

    #[test]
    fn lambda_zero_gives_fprime() {
        let (g, f) = field(16, 1.0, 1);
        let pair = principal_eigenpair(&assemble(&g, &f, 0.0, 1.0).unwrap()).unwrap();
        assert!((pair.mu - 1.0).abs() < 1e-12);
        let c = 1.0 / g.len() as f64;
        assert!(pair.vector.iter().all(|v| (v - c).abs() < 1e-12));
    }

    #[test]
    fn dense_gap_for_zero_shear() {
        use std::f64::consts::PI;
        let g = GridSpec::square(8).unwrap();
        let op = assemble(&g, &ShearField::zero(g), 0.5, 1.0).unwrap();
        let pair = principal_eigenpair_with(&op, EigenMethod::Dense).unwrap();
        let gap = pair.spectral_gap.unwrap();
        assert!((gap - 4.0 * PI * PI).abs() < 1e-8, "{gap}");
    }

    #[test]
    fn auxiliary_zero_shear_is_linear() {
        let g = GridSpec::square(8).unwrap();
        let z = ShearField::zero(g);
        for (lambda, c) in [(0.5, -2.5), (1.0, -3.0), (2.0, 0.7)] {
            let rho = rho_c(&z, &g, lambda, c).unwrap();
            assert!((rho - lambda * c).abs() < 1e-12);
        }
        let (g, f) = field(16, 1.0, 1);
        assert!(rho_c(&f, &g, 0.0, -2.5).unwrap().abs() < 1e-12);
    }

    #[test]
    fn identity_defect_is_small() {
        let (g, f) = field(16, 1.0, 1);
        let op = assemble(&g, &f, 1.0, 1.0).unwrap();
        let pair = principal_eigenpair(&op).unwrap();
        assert!(pair.identity_defect(&op) < 1e-8 * (1.0 + pair.mu));
        let aux = assemble_auxiliary(&g, &f, 0.8, -2.5).unwrap();
        let pair = principal_eigenpair(&aux).unwrap();
        assert!(pair.identity_defect(&aux) < 1e-8 * (1.0 + pair.mu.abs()));
    }
}
