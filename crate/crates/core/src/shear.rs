//! Space-time periodic shear profiles `b(y, τ)` and their grid samples.

use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{first_derivative_matrix, GridSpec};

/// Below this the discrete `∫|∂_y b|²` is treated as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// One term `amplitude * cos(2π (ky y + kt τ) + phase)` of a Fourier shear,
/// in coordinates normalized to the unit cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FourierMode {
    pub amplitude: f64,
    pub ky: i32,
    pub kt: i32,
    #[serde(default)]
    pub phase: f64,
}

impl FourierMode {
    fn eval(&self, y: f64, tau: f64) -> f64 {
        self.amplitude * (2.0 * PI * (self.ky as f64 * y + self.kt as f64 * tau) + self.phase).cos()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShearSpec {
    /// `b(y, τ) = δ sin(2πy) (1 + sin(2π n τ))`.
    Parametric { delta: f64, freq: u32 },
    /// Grid samples in flat order (`y` fastest).
    Tabulated {
        n_y: usize,
        n_tau: usize,
        values: Vec<f64>,
    },
    /// Finite sum of Fourier modes, sampled onto the grid.
    Fourier { modes: Vec<FourierMode> },
}

impl ShearSpec {
    pub fn parametric(delta: f64, freq: u32) -> Self {
        ShearSpec::Parametric { delta, freq }
    }

    pub fn zero() -> Self {
        ShearSpec::Parametric {
            delta: 0.0,
            freq: 0,
        }
    }

    /// Amplitude and frequency when this is the parametric family.
    pub fn family_params(&self) -> Option<(f64, u32)> {
        match *self {
            ShearSpec::Parametric { delta, freq } => Some((delta, freq)),
            _ => None,
        }
    }

    /// Value at unit-cell coordinates `(y, τ)`. `None` for tabulated shears,
    /// which only exist at their grid points.
    pub fn value_at(&self, y: f64, tau: f64) -> Option<f64> {
        match self {
            ShearSpec::Parametric { delta, freq } => {
                Some(delta * (2.0 * PI * y).sin() * (1.0 + (2.0 * PI * *freq as f64 * tau).sin()))
            }
            ShearSpec::Fourier { modes } => Some(modes.iter().map(|m| m.eval(y, tau)).sum()),
            ShearSpec::Tabulated { .. } => None,
        }
    }

    /// Loads a tabulated shear from CSV with header `i_y,i_tau,value`.
    /// Every grid point must appear exactly once.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        Self::read_csv(file)
    }

    pub fn read_csv(reader: impl std::io::Read) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header = rdr.headers().map_err(|e| parse_err(1, e))?.clone();
        let expected = ["i_y", "i_tau", "value"];
        if header.iter().collect::<Vec<_>>() != expected {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header `i_y,i_tau,value`, found `{}`", header.iter().collect::<Vec<_>>().join(",")),
            });
        }
        let mut entries = Vec::new();
        for (k, row) in rdr.records().enumerate() {
            let line = k as u64 + 2;
            let row = row.map_err(|e| parse_err(line, e))?;
            let field = |i: usize| row.get(i).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing column {i}"),
            });
            let i_y: usize = field(0)?.parse().map_err(|e| parse_err(line, e))?;
            let i_tau: usize = field(1)?.parse().map_err(|e| parse_err(line, e))?;
            let value: f64 = field(2)?.parse().map_err(|e| parse_err(line, e))?;
            entries.push((line, i_y, i_tau, value));
        }
        let n_y = entries.iter().map(|e| e.1 + 1).max().unwrap_or(0);
        let n_tau = entries.iter().map(|e| e.2 + 1).max().unwrap_or(0);
        let mut values = vec![f64::NAN; n_y * n_tau];
        for &(line, i_y, i_tau, value) in &entries {
            let slot = &mut values[i_tau * n_y + i_y];
            if !slot.is_nan() {
                return Err(Error::Parse {
                    line,
                    message: format!("duplicate entry for ({i_y}, {i_tau})"),
                });
            }
            *slot = value;
        }
        if let Some(k) = values.iter().position(|v| v.is_nan()) {
            return Err(Error::Parse {
                line: entries.len() as u64 + 1,
                message: format!("missing entry for ({}, {})", k % n_y, k / n_y),
            });
        }
        Ok(ShearSpec::Tabulated {
            n_y,
            n_tau,
            values,
        })
    }

    /// Samples the shear at every grid point.
    pub fn sample(&self, grid: &GridSpec) -> Result<ShearField> {
        let values = match self {
            ShearSpec::Parametric { .. } | ShearSpec::Fourier { .. } => {
                grid_map(grid, |y, tau| self.value_at(y, tau).unwrap_or_default())
            }
            ShearSpec::Tabulated {
                n_y,
                n_tau,
                values,
            } => {
                if *n_y != grid.n_y() || *n_tau != grid.n_tau() || values.len() != grid.len() {
                    return Err(Error::DimensionMismatch {
                        expected: grid.to_string(),
                        found: format!("{n_y}x{n_tau} with {} values", values.len()),
                    });
                }
                values.clone()
            }
        };
        ShearField::new(values, *grid, self.clone())
    }
}

fn parse_err(line: u64, e: impl std::fmt::Display) -> Error {
    Error::Parse {
        line,
        message: e.to_string(),
    }
}

/// Evaluates `f` at unit-cell normalized coordinates of every grid point.
fn grid_map(grid: &GridSpec, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(grid.len());
    for i_tau in 0..grid.n_tau() {
        let tau = i_tau as f64 / grid.n_tau() as f64;
        for i_y in 0..grid.n_y() {
            out.push(f(i_y as f64 / grid.n_y() as f64, tau));
        }
    }
    out
}

/// Shear samples on a grid, in flat order.
#[derive(Debug, Clone, PartialEq)]
pub struct ShearField {
    values: Vec<f64>,
    grid: GridSpec,
    source: ShearSpec,
}

impl ShearField {
    pub fn new(values: Vec<f64>, grid: GridSpec, source: ShearSpec) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values", grid.len()),
                found: format!("{} values", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "shear",
                reason: format!("non-finite sample {bad}"),
            });
        }
        Ok(Self {
            values,
            grid,
            source,
        })
    }

    /// Field built directly from samples; its source is the table itself.
    pub fn from_values(values: Vec<f64>, grid: GridSpec) -> Result<Self> {
        let source = ShearSpec::Tabulated {
            n_y: grid.n_y(),
            n_tau: grid.n_tau(),
            values: values.clone(),
        };
        Self::new(values, grid, source)
    }

    pub fn zero(grid: GridSpec) -> Self {
        Self {
            values: vec![0.0; grid.len()],
            grid,
            source: ShearSpec::zero(),
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn source(&self) -> &ShearSpec {
        &self.source
    }

    pub fn at(&self, i_y: usize, i_tau: usize) -> Result<f64> {
        Ok(self.values[self.grid.flatten_index(i_y, i_tau)?])
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Plain grid average; equals the trapezoid rule on a periodic grid.
    pub fn mean_over_cell(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Discrete `∫ |∂_y b|² dy dτ` over the cell, differentiating spectrally in `y`.
    pub fn check_nondegenerate(&self) -> f64 {
        let n_y = self.grid.n_y();
        let dy = first_derivative_matrix(n_y, self.grid.period_y())
            .expect("grid already validated");
        let mut total = 0.0;
        for row in self.values.chunks_exact(n_y) {
            total += dy.apply(row).iter().map(|g| g * g).sum::<f64>();
        }
        total * self.grid.h_y() * self.grid.h_tau()
    }

    pub fn is_degenerate(&self) -> bool {
        self.check_nondegenerate() < DEGENERACY_THRESHOLD
    }

    /// Field constant in `τ` whose profile is the `τ`-average of this one.
    pub fn time_average(&self) -> ShearField {
        let (n_y, n_tau) = (self.grid.n_y(), self.grid.n_tau());
        let mut profile = vec![0.0; n_y];
        for row in self.values.chunks_exact(n_y) {
            for (p, v) in profile.iter_mut().zip(row) {
                *p += v;
            }
        }
        profile.iter_mut().for_each(|p| *p /= n_tau as f64);
        let values: Vec<f64> = (0..n_tau).flat_map(|_| profile.iter().copied()).collect();
        ShearField::from_values(values, self.grid).expect("shape preserved")
    }

    /// Cyclic shift by whole grid cells, `b'(i_y, i_tau) = b(i_y - dy, i_tau - dt)`.
    pub fn shifted(&self, dy: usize, dt: usize) -> ShearField {
        let (n_y, n_tau) = (self.grid.n_y(), self.grid.n_tau());
        let mut values = vec![0.0; self.values.len()];
        for i_tau in 0..n_tau {
            for i_y in 0..n_y {
                let src = ((i_tau + n_tau - dt % n_tau) % n_tau) * n_y + (i_y + n_y - dy % n_y) % n_y;
                values[i_tau * n_y + i_y] = self.values[src];
            }
        }
        ShearField::from_values(values, self.grid).expect("shape preserved")
    }

    /// Adds a constant to every sample.
    pub fn offset(&self, eps: f64) -> ShearField {
        let values = self.values.iter().map(|v| v + eps).collect();
        ShearField::from_values(values, self.grid).expect("shape preserved")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_amplitude_is_zero_field() {
        let g = GridSpec::unit(8, 12).unwrap();
        for n in 0..4 {
            let f = ShearSpec::parametric(0.0, n).sample(&g).unwrap();
            assert!(f.values().iter().all(|&v| v == 0.0));
            assert_eq!(f.mean_over_cell(), 0.0);
            assert_eq!(f.check_nondegenerate(), 0.0);
            assert!(f.is_degenerate());
        }
    }

    #[test]
    fn steady_family_member_is_replicated_sine() {
        let g = GridSpec::unit(8, 6).unwrap();
        let f = ShearSpec::parametric(1.0, 0).sample(&g).unwrap();
        for i_tau in 0..6 {
            for i_y in 0..8 {
                let expect = (2.0 * PI * i_y as f64 / 8.0).sin();
                assert!((f.at(i_y, i_tau).unwrap() - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn hand_evaluated_point() {
        let g = GridSpec::unit(8, 8).unwrap();
        let f = ShearSpec::parametric(2.0, 1).sample(&g).unwrap();
        assert!((f.at(2, 2).unwrap() - 4.0).abs() < 1e-14);
    }

    #[test]
    fn family_is_mean_zero() {
        for n in [16, 32] {
            let g = GridSpec::square(n).unwrap();
            for delta in [0.1, 1.0, 10.0] {
                for freq in 0..=4 {
                    let f = ShearSpec::parametric(delta, freq).sample(&g).unwrap();
                    assert!(f.mean_over_cell().abs() < 1e-14 * delta.max(1.0));
                }
            }
        }
    }

    #[test]
    fn constant_table_mean_is_one() {
        let g = GridSpec::unit(4, 4).unwrap();
        let f = ShearField::from_values(vec![1.0; 16], g).unwrap();
        assert_eq!(f.mean_over_cell(), 1.0);
        assert!(f.check_nondegenerate() < 1e-20);
    }

    #[test]
    fn nondegeneracy_integral() {
        let g = GridSpec::square(32).unwrap();
        let f = ShearSpec::parametric(1.0, 1).sample(&g).unwrap();
        // ∫(2π cos 2πy)² dy = 2π², ∫(1 + sin 2πτ)² dτ = 3/2
        let expected = 2.0 * PI * PI * 1.5;
        assert!((f.check_nondegenerate() - expected).abs() < 1e-9);
        assert!(!f.is_degenerate());
    }

    #[test]
    fn time_average_of_family() {
        let g = GridSpec::square(16).unwrap();
        let steady = ShearSpec::parametric(0.7, 0).sample(&g).unwrap();
        for freq in 1..=4 {
            let f = ShearSpec::parametric(0.7, freq).sample(&g).unwrap();
            let avg = f.time_average();
            for (a, b) in avg.values().iter().zip(steady.values()) {
                assert!((a - b).abs() < 1e-14);
            }
        }
        let again = steady.time_average();
        for (a, b) in again.values().iter().zip(steady.values()) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn tabulated_dimension_mismatch() {
        let g = GridSpec::unit(4, 4).unwrap();
        let spec = ShearSpec::Tabulated {
            n_y: 4,
            n_tau: 6,
            values: vec![0.0; 24],
        };
        assert!(matches!(spec.sample(&g), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn non_finite_rejected() {
        let g = GridSpec::unit(4, 4).unwrap();
        let mut v = vec![0.0; 16];
        v[3] = f64::INFINITY;
        assert!(ShearField::from_values(v, g).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let text = "i_y,i_tau,value\n0,0,1.5\n1,0,-1.5\n0,1,0.25\n1,1,-0.25\n";
        let spec = ShearSpec::read_csv(text.as_bytes()).unwrap();
        assert_eq!(
            spec,
            ShearSpec::Tabulated {
                n_y: 2,
                n_tau: 2,
                values: vec![1.5, -1.5, 0.25, -0.25]
            }
        );

        let bad = "i_y,i_tau,value\n0,0,1.5\n1,0,oops\n";
        match ShearSpec::read_csv(bad.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        let missing = "i_y,i_tau,value\n0,0,1\n1,1,2\n";
        assert!(ShearSpec::read_csv(missing.as_bytes()).is_err());
        let header = "y,t,v\n0,0,1\n";
        assert!(ShearSpec::read_csv(header.as_bytes()).is_err());
    }

    #[test]
    fn fourier_pure_time_mode() {
        let g = GridSpec::unit(4, 8).unwrap();
        let spec = ShearSpec::Fourier {
            modes: vec![FourierMode {
                amplitude: 2.0,
                ky: 0,
                kt: 1,
                phase: 0.0,
            }],
        };
        let f = spec.sample(&g).unwrap();
        assert!(f.mean_over_cell().abs() < 1e-15);
        assert!(f.is_degenerate());
        assert!((f.at(3, 2).unwrap() - (2.0 * (PI / 2.0).cos())).abs() < 1e-15);
    }
}
