use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph needs at least 2 vertices, got {0}")]
    TooFewVertices(usize),
    #[error("vertex {index} has non-positive weight {weight}")]
    NonPositiveWeight { index: usize, weight: f64 },
    #[error("vertices {0} and {1} share the same position")]
    DuplicatePosition(usize, usize),
    #[error("vertex {index} has dimension {got}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        got: usize,
    },
    #[error("matrix {name} is not symmetric at ({row}, {col})")]
    Asymmetric {
        name: String,
        row: usize,
        col: usize,
    },
    #[error("matrix {name} has invalid entry at ({row}, {col}): {value}")]
    InvalidEntry {
        name: String,
        row: usize,
        col: usize,
        value: f64,
    },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("log-singular kernel evaluated at coincident vertices {0} and {1}")]
    SingularKernel(usize, usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("state outside the mobility domain: species {species}, vertex {vertex}, u = {value}")]
    OutsideDomain {
        species: usize,
        vertex: usize,
        value: f64,
    },
    #[error("negative density {value} at species {species}, vertex {vertex} (t = {t})")]
    NegativeDensity {
        species: usize,
        vertex: usize,
        value: f64,
        t: f64,
    },
    #[error("step size underflow at t = {t} (dt = {dt})")]
    StepUnderflow { t: f64, dt: f64 },
    #[error("instance too large: {0} candidate pairs")]
    TooLarge(u128),
    #[error("state {0} is not present for these parameters")]
    TagNotPresent(String),
    #[error("stability cross-validation failed for {tag}: {detail}")]
    StabilityMismatch { tag: String, detail: String },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures of the numerical integration itself, as opposed to
    /// bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NegativeDensity { .. } | Error::StepUnderflow { .. } | Error::StabilityMismatch { .. }
        )
    }
}
