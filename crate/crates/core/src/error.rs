use thiserror::Error;

/// Every failure the library can report.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("matrix is not unimodular (det = {det})")]
    NotUnimodular { det: i64 },

    #[error("matrix is not hyperbolic: eigenvalue modulus {modulus} is within 1e-9 of 1")]
    NotHyperbolic { modulus: f64 },

    #[error("leaf displacement {t} exceeds the local radius {radius}")]
    LeafRadiusExceeded { t: f64, radius: f64 },

    #[error("points are not on a common local leaf (off-leaf residual {residual:e})")]
    LeafMismatch { residual: f64 },

    #[error("iterate norm exceeded 1e300 after {steps} steps")]
    Overflow { steps: i64 },

    #[error("R factor diagonal underflowed to zero at step {step}")]
    Degenerate { step: usize },

    #[error("no convergence within {n_max} steps")]
    NoConvergence { n_max: usize },

    #[error("eigenvalue moduli differ: {min} vs {max}")]
    MultipleModuli { min: f64, max: f64 },

    #[error("flag level {index} is not invariant at x = {x:?} (residual {residual:e})")]
    NotInvariant { x: Vec<f64>, index: usize, residual: f64 },

    #[error("orbit metric norm {norm:e} exceeds 1e6")]
    NotBounded { norm: f64 },

    #[error("conjugacy is numerically singular (condition number {cond:e})")]
    SingularC { cond: f64 },

    #[error("all differences fall below the noise floor")]
    InsufficientSignal,

    #[error("singular value gap {ratio} is below the required factor 2")]
    GapTooSmall { ratio: f64 },

    #[error("induced operator twist is not uniformly bounded (norm {norm:e})")]
    TwistNotBounded { norm: f64 },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl LabError {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        LabError::Config { path: path.into(), message: message.into() }
    }
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
