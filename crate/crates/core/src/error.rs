use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A coefficient returned a non-finite value.
    #[error("non-finite coefficient `{name}` at point {point:?}")]
    InvalidCoefficient { name: String, point: Vec<f64> },

    /// Mollifier quadrature did not settle between refinements.
    #[error("mollifier quadrature did not converge (refinement gap {gap:e})")]
    Mollifier { gap: f64 },

    /// A path produced NaN or overflowed at the given step.
    #[error("path blew up at step {step}")]
    Blowup { step: usize },

    /// Monte Carlo noise dominates the quantity being estimated.
    #[error("inconclusive estimate: value {value:e} with standard error {stderr:e}")]
    InconclusiveEstimate { value: f64, stderr: f64 },

    /// The Picard map failed to contract at this regularisation level.
    #[error("Picard map not contractive at lambda = {lambda} (ratios {ratios:?})")]
    NotContractive { lambda: f64, ratios: Vec<f64> },

    /// A linear solve in the elliptic pipeline failed.
    #[error("elliptic solver failure: {0}")]
    EllipticSolver(String),

    /// The measured gradient of `u` exceeds the acceptance threshold.
    #[error("gradient bound {grad_bound} exceeds threshold {threshold}")]
    GradientTooLarge { grad_bound: f64, threshold: f64 },

    /// A point left the computational box.
    #[error("point {point:?} outside the grid box [-{radius}, {radius}]^d")]
    OutOfDomain { point: Vec<f64>, radius: f64 },

    /// No finite growth constants fit the transformed drift.
    #[error("constant fit failed at {point:?}: {reason}")]
    FitFailure { point: Vec<f64>, reason: String },

    /// Pathwise error failed to decrease under mesh refinement.
    #[error("pathwise consistency failure: errors {errors:?}")]
    ConsistencyFailure { errors: Vec<f64> },

    /// Exact OT requested above the atom cutoff.
    #[error("{atoms} atoms exceeds the exact solver cutoff of {limit}; use the Sinkhorn bracket")]
    UseSinkhorn { atoms: usize, limit: usize },

    /// Two paths or functions live on incompatible grids.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Dimension outside the supported range.
    #[error("unsupported dimension {dim}: {reason}")]
    UnsupportedDimension { dim: usize, reason: String },

    /// Malformed input to an operation.
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
