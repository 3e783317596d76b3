//! Minimal speeds of KPP fronts in mean-zero space-time periodic shear flows.
//!
//! The minimal speed is `c* = −inf_{λ>0} μ(λ)/λ`, where `μ(λ)` is the
//! principal eigenvalue of the periodic-parabolic operator
//! `Δ_y φ − φ_τ + (λ² + λ b + f'(0)) φ` on the unit `(y, τ)` cell. The crate
//! discretizes that operator with Fourier collocation ([`grid`], [`eigen`]),
//! minimizes over `λ` ([`variational`]), runs amplitude/frequency sweeps with
//! log-log fits ([`sweeps`]), and cross-checks speeds against a direct
//! time-dependent simulation ([`oracle`]).

pub mod eigen;
mod error;
pub mod exec;
pub mod grid;
pub mod oracle;
pub mod shear;
pub mod sweeps;
pub mod variational;

pub use error::{Error, Result};
pub use exec::Execution;
pub use grid::{first_derivative_matrix, second_derivative_matrix, DiffMatrix, GridSpec};
pub use shear::{FourierMode, ShearField, ShearSpec};
pub use variational::{enhancement, minimize_h, MinimizeOptions, SpeedResult};
pub use sweeps::{fit_loglog_slope, read_records, run_sweep, write_records, SweepConfig, SweepRecord};
