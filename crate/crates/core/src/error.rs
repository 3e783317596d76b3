use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("index ({i_y}, {i_tau}) out of range for a {n_y}x{n_tau} grid")]
    IndexOutOfRange {
        i_y: usize,
        i_tau: usize,
        n_y: usize,
        n_tau: usize,
    },

    #[error("flat index {index} out of range for {len} grid points")]
    FlatIndexOutOfRange { index: usize, len: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: String, found: String },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    /// The eigenvector attached to the selected eigenvalue changes sign, which
    /// on a periodic-parabolic operator means the grid is too coarse.
    #[error("principal eigenvector not positive (min entry {min_entry:.3e} at mu = {mu}); grid is under-resolved")]
    PositivityViolation { mu: f64, min_entry: f64 },

    #[error("principal eigenvalue is complex: {re} + {im}i")]
    ComplexPrincipal { re: f64, im: f64 },

    #[error("eigensolver failed: {0}")]
    EigenSolver(String),

    #[error("lambda must be positive, got {0}")]
    Domain(f64),

    #[error("minimization did not converge after {iterations} iterations (best lambda {best_lambda}, h {best_h})")]
    NotConverged {
        iterations: usize,
        best_lambda: f64,
        best_h: f64,
    },

    #[error("need at least {needed} usable points, found {found}")]
    InsufficientData { needed: usize, found: usize },

    #[error("time step {dt} exceeds the explicit stability limit {limit}")]
    Cfl { dt: f64, limit: f64 },

    #[error("solution left [0, 1] at t = {time}: range [{min}, {max}]")]
    BoundsViolated { time: f64, min: f64, max: f64 },

    #[error("front reached the x-boundary at t = {time} (position {position})")]
    BoundaryContamination {
        time: f64,
        position: f64,
        partial: Box<crate::oracle::FrontTrace>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
