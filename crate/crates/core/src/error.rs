use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid polygon: {0}")]
    InvalidPolygon(String),

    #[error("grid too coarse: {0}")]
    ResolutionTooCoarse(String),

    #[error("sensor under-resolved: radius {radius} < 3h = {min}")]
    UnderResolvedSensor { radius: f64, min: f64 },

    #[error("point ({x}, {y}) lies outside the grid")]
    OutsideGrid { x: f64, y: f64 },

    #[error("linear solve did not converge after {iterations} iterations (relative residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("state field is nonpositive ({value:e}) at fluid node {node}")]
    NonPositiveState { node: usize, value: f64 },

    #[error("infeasible placement: {0}")]
    Infeasible(String),

    #[error("infeasible instance: {0}")]
    InfeasibleInstance(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("invalid configuration field `{field}`: {message}")]
    Validation { field: String, message: String },

    #[error("all {0} multistart runs failed")]
    AllRunsFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status used by the `place` binary: 1 for input and
    /// validation problems, 2 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidPolygon(_)
            | Error::Parse { .. }
            | Error::Validation { .. }
            | Error::InvalidArgument(_)
            | Error::Io(_)
            | Error::Json(_) => 1,
            _ => 2,
        }
    }
}
