use thiserror::Error;

/// Errors raised by the discretization, solvers and experiment pipelines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: operands live on different grids")]
    GridMismatch,

    #[error("region `{0}` is empty after rasterization")]
    EmptyRegion(&'static str),

    #[error("regions `{0}` and `{1}` overlap after rasterization")]
    RegionOverlap(&'static str, &'static str),

    #[error("regions `{a}` and `{b}` are separated by {gap} cells, need at least {required}")]
    InsufficientGap {
        a: &'static str,
        b: &'static str,
        gap: usize,
        required: usize,
    },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("conductivity must be positive, found {value} at node {node}")]
    NonPositiveConductivity { node: usize, value: f64 },

    #[error("conductivity must equal 1 on the outermost cell ring, found {value} at node {node}")]
    UnframedConductivity { node: usize, value: f64 },

    #[error("function is not supported where required: nonzero value at node {node} ({region})")]
    SupportViolation { node: usize, region: &'static str },

    #[error("interior block is not positive definite (pivot {pivot} at row {row})")]
    Indefinite { row: usize, pivot: f64 },

    #[error("{method} did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence {
        method: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
