use thiserror::Error;

#[derive(Debug, Error)]
pub enum IctmError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid mismatch: fields live on different grids")]
    GridMismatch,

    #[error("field length {got} does not match node count {expected}")]
    FieldLength { expected: usize, got: usize },

    #[error("non-finite value at node {0}")]
    NonFinite(usize),

    #[error("indicator value {value} at node {node} is not 0 or 1")]
    NotBinary { node: usize, value: f64 },

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("volume target {target} outside 0..={n_nodes}")]
    VolumeTarget { target: usize, n_nodes: usize },

    #[error("indicator holds {actual} ones but the volume target is {target}")]
    InfeasibleVolume { target: usize, actual: usize },

    #[error("invalid boundary specification: {0}")]
    InvalidBoundary(String),

    #[error("conjugate gradient did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, IctmError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> IctmError {
    IctmError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
