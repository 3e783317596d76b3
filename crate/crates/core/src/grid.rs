//! Periodic collocation grid on the (y, τ) cell and the Fourier spectral
//! differentiation matrices built on it.
//!
//! Grid points are `y_j = j * h_y`, `τ_m = m * h_τ` for `j < n_y`, `m < n_τ`.
//! Grid functions are stored flat with `y` varying fastest, so the operator
//! `∂²_y` acts as `I_τ ⊗ D²_y` and `∂_τ` as `D_τ ⊗ I_y`.

use std::f64::consts::PI;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest number of points accepted in either direction.
pub const MIN_POINTS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n_y: usize,
    n_tau: usize,
    period_y: f64,
    period_tau: f64,
}

impl GridSpec {
    pub fn new(n_y: usize, n_tau: usize, period_y: f64, period_tau: f64) -> Result<Self> {
        check_points(n_y, "n_y")?;
        check_points(n_tau, "n_tau")?;
        check_period(period_y, "period_y")?;
        check_period(period_tau, "period_tau")?;
        Ok(Self {
            n_y,
            n_tau,
            period_y,
            period_tau,
        })
    }

    /// Grid on the unit cell `[0,1) x [0,1)`.
    pub fn unit(n_y: usize, n_tau: usize) -> Result<Self> {
        Self::new(n_y, n_tau, 1.0, 1.0)
    }

    /// Square unit-cell grid.
    pub fn square(n: usize) -> Result<Self> {
        Self::unit(n, n)
    }

    pub fn n_y(&self) -> usize {
        self.n_y
    }

    pub fn n_tau(&self) -> usize {
        self.n_tau
    }

    pub fn period_y(&self) -> f64 {
        self.period_y
    }

    pub fn period_tau(&self) -> f64 {
        self.period_tau
    }

    pub fn h_y(&self) -> f64 {
        self.period_y / self.n_y as f64
    }

    pub fn h_tau(&self) -> f64 {
        self.period_tau / self.n_tau as f64
    }

    /// Total degrees of freedom, `n_y * n_tau`.
    pub fn len(&self) -> usize {
        self.n_y * self.n_tau
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn y(&self, i_y: usize) -> f64 {
        i_y as f64 * self.h_y()
    }

    pub fn tau(&self, i_tau: usize) -> f64 {
        i_tau as f64 * self.h_tau()
    }

    pub fn flatten_index(&self, i_y: usize, i_tau: usize) -> Result<usize> {
        if i_y >= self.n_y || i_tau >= self.n_tau {
            return Err(Error::IndexOutOfRange {
                i_y,
                i_tau,
                n_y: self.n_y,
                n_tau: self.n_tau,
            });
        }
        Ok(i_tau * self.n_y + i_y)
    }

    pub fn unflatten_index(&self, index: usize) -> Result<(usize, usize)> {
        if index >= self.len() {
            return Err(Error::FlatIndexOutOfRange {
                index,
                len: self.len(),
            });
        }
        Ok((index % self.n_y, index / self.n_y))
    }

    /// Coordinates `(y, τ)` of a flat index.
    pub fn point(&self, index: usize) -> Result<(f64, f64)> {
        let (i_y, i_tau) = self.unflatten_index(index)?;
        Ok((self.y(i_y), self.tau(i_tau)))
    }

    /// True when both grids have the same point counts.
    pub fn same_shape(&self, other: &GridSpec) -> bool {
        self.n_y == other.n_y && self.n_tau == other.n_tau
    }
}

impl std::fmt::Display for GridSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}", self.n_y, self.n_tau)
    }
}

fn check_points(n: usize, name: &str) -> Result<()> {
    if n < MIN_POINTS || n % 2 != 0 {
        return Err(Error::InvalidGrid(format!(
            "{name} must be even and at least {MIN_POINTS}, got {n}"
        )));
    }
    Ok(())
}

fn check_period(period: f64, name: &str) -> Result<()> {
    if !(period.is_finite() && period > 0.0) {
        return Err(Error::InvalidGrid(format!(
            "{name} must be positive and finite, got {period}"
        )));
    }
    Ok(())
}

/// Dense Fourier collocation differentiation matrix.
#[derive(Debug, Clone)]
pub struct DiffMatrix {
    order: u8,
    period: f64,
    entries: Mat<f64>,
}

impl DiffMatrix {
    pub fn order(&self) -> u8 {
        self.order
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &Mat<f64> {
        &self.entries
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[(i, j)]
    }

    /// Matrix-vector product `D * v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(v.len(), self.size(), "vector length does not match matrix");
        let n = self.size();
        (0..n)
            .map(|i| (0..n).map(|j| self.entries[(i, j)] * v[j]).sum())
            .collect()
    }
}

/// First-derivative matrix for `period`-periodic functions sampled at `n`
/// equispaced points.
///
/// On `[0, 2π)` the entries are `0` on the diagonal and
/// `½ (-1)^(i-j) cot((i-j) h / 2)` elsewhere, `h = 2π/n`; the result is
/// scaled by `2π / period`.
pub fn first_derivative_matrix(n: usize, period: f64) -> Result<DiffMatrix> {
    check_points(n, "n")?;
    check_period(period, "period")?;
    let h = 2.0 * PI / n as f64;
    let scale = 2.0 * PI / period;
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let k = i as i64 - j as i64;
            0.5 * alternating(k) / (0.5 * k as f64 * h).tan() * scale
        }
    });
    Ok(DiffMatrix {
        order: 1,
        period,
        entries,
    })
}

/// Second-derivative matrix for `period`-periodic functions.
///
/// On `[0, 2π)`: diagonal `-π²/(3h²) - 1/6`, off-diagonal
/// `-(-1)^(i-j) / (2 sin²((i-j) h / 2))`, then scaled by `(2π / period)²`.
pub fn second_derivative_matrix(n: usize, period: f64) -> Result<DiffMatrix> {
    check_points(n, "n")?;
    check_period(period, "period")?;
    let h = 2.0 * PI / n as f64;
    let scale = (2.0 * PI / period).powi(2);
    let diagonal = -PI * PI / (3.0 * h * h) - 1.0 / 6.0;
    let entries = Mat::from_fn(n, n, |i, j| {
        if i == j {
            diagonal * scale
        } else {
            let k = i as i64 - j as i64;
            let s = (0.5 * k as f64 * h).sin();
            -alternating(k) / (2.0 * s * s) * scale
        }
    });
    Ok(DiffMatrix {
        order: 2,
        period,
        entries,
    })
}

fn alternating(k: i64) -> f64 {
    if k.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn samples(n: usize, period: f64, f: impl Fn(f64) -> f64) -> Vec<f64> {
        (0..n).map(|j| f(j as f64 * period / n as f64)).collect()
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn rejects_odd_small_and_bad_period() {
        assert!(first_derivative_matrix(5, 1.0).is_err());
        assert!(first_derivative_matrix(2, 1.0).is_err());
        assert!(second_derivative_matrix(7, 1.0).is_err());
        assert!(first_derivative_matrix(8, 0.0).is_err());
        assert!(second_derivative_matrix(8, -1.0).is_err());
        assert!(second_derivative_matrix(8, f64::NAN).is_err());
        assert!(GridSpec::unit(6, 3).is_err());
    }

    #[test]
    fn first_derivative_diagonal_is_zero() {
        let d = first_derivative_matrix(4, 2.0 * PI).unwrap();
        for i in 0..4 {
            assert_eq!(d.get(i, i), 0.0);
        }
    }

    #[test]
    fn second_derivative_diagonal_n4() {
        let d = second_derivative_matrix(4, 2.0 * PI).unwrap();
        for i in 0..4 {
            assert!((d.get(i, i) + 1.5).abs() < 1e-14);
        }
    }

    #[test]
    fn constants_are_annihilated() {
        for n in [4, 8, 16, 32] {
            let ones = vec![1.0; n];
            let d1 = first_derivative_matrix(n, 1.0).unwrap().apply(&ones);
            let d2 = second_derivative_matrix(n, 1.0).unwrap().apply(&ones);
            // (2π)² scaling puts D² entries near n²·3; allow for it
            assert!(d1.iter().all(|v| v.abs() < 1e-12), "{d1:?}");
            assert!(d2.iter().all(|v| v.abs() < 1e-12 * n as f64 * n as f64), "{d2:?}");
        }
    }

    #[test]
    fn symmetry_structure() {
        for n in [4, 10, 16] {
            let d1 = first_derivative_matrix(n, 1.0).unwrap();
            let d2 = second_derivative_matrix(n, 1.0).unwrap();
            for i in 0..n {
                for j in 0..n {
                    assert!((d1.get(i, j) + d1.get(j, i)).abs() < 1e-12);
                    assert!((d2.get(i, j) - d2.get(j, i)).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn differentiates_sine_spectrally() {
        let n = 16;
        let f = samples(n, 1.0, |y| (2.0 * PI * y).sin());
        let df = first_derivative_matrix(n, 1.0).unwrap().apply(&f);
        let exact = samples(n, 1.0, |y| 2.0 * PI * (2.0 * PI * y).cos());
        assert!(max_abs_diff(&df, &exact) < 1e-10);

        let d2f = second_derivative_matrix(n, 1.0).unwrap().apply(&f);
        let exact2 = samples(n, 1.0, |y| -4.0 * PI * PI * (2.0 * PI * y).sin());
        assert!(max_abs_diff(&d2f, &exact2) < 1e-8);
    }

    #[test]
    fn two_pi_period_matches_canonical() {
        let n = 12;
        let f = samples(n, 2.0 * PI, |y| (3.0 * y).cos());
        let df = first_derivative_matrix(n, 2.0 * PI).unwrap().apply(&f);
        let exact = samples(n, 2.0 * PI, |y| -3.0 * (3.0 * y).sin());
        assert!(max_abs_diff(&df, &exact) < 1e-11);
    }

    #[test]
    fn second_matches_square_of_first_on_resolved_modes() {
        let n = 32;
        let d1 = first_derivative_matrix(n, 1.0).unwrap();
        let d2 = second_derivative_matrix(n, 1.0).unwrap();
        for k in 1..n / 4 {
            let f = samples(n, 1.0, |y| (2.0 * PI * k as f64 * y).sin() + 0.5 * (2.0 * PI * k as f64 * y).cos());
            let a = d2.apply(&f);
            let b = d1.apply(&d1.apply(&f));
            let scale = (2.0 * PI * k as f64).powi(2);
            assert!(max_abs_diff(&a, &b) < 1e-8 * scale, "k = {k}");
        }
    }

    #[test]
    fn flatten_round_trip() {
        let g = GridSpec::square(8).unwrap();
        for i_tau in 0..8 {
            for i_y in 0..8 {
                let k = g.flatten_index(i_y, i_tau).unwrap();
                assert_eq!(g.unflatten_index(k).unwrap(), (i_y, i_tau));
            }
        }
        assert_eq!(g.flatten_index(0, 0).unwrap(), 0);
        assert!(g.flatten_index(8, 0).is_err());
        assert!(g.flatten_index(0, 8).is_err());
        assert!(g.unflatten_index(64).is_err());
    }

    #[test]
    fn y_varies_fastest() {
        let g = GridSpec::unit(4, 6).unwrap();
        assert_eq!(g.unflatten_index(5).unwrap(), (1, 1));
        assert_eq!(g.len(), 24);
        let (y, tau) = g.point(5).unwrap();
        assert!((y - 0.25).abs() < 1e-15 && (tau - 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn spacing_times_count_is_period() {
        for n in [4, 6, 8, 12, 16, 24, 32, 48, 64, 128] {
            let g = GridSpec::new(n, n, 1.0, 2.0 * PI).unwrap();
            assert_eq!(g.h_y() * n as f64, 1.0);
            assert_eq!(g.h_tau() * n as f64, 2.0 * PI);
        }
    }
}
