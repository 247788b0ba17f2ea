use std::path::PathBuf;

use crate::solver::FieldSolution;

/// Errors raised while building, solving or post-processing a channel problem.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("degenerate channel at x = {x}: bottom wall {bottom} is not below top wall {top}")]
    DegenerateChannel { x: f64, bottom: f64, top: f64 },

    #[error("invalid mesh: {0}")]
    Mesh(String),

    #[error("mesh has no edges tagged {0}")]
    MissingBoundary(&'static str),

    #[error("constraint conflict on velocity dof {dof}{}", location_suffix(.location))]
    ConstraintConflict { dof: usize, location: Option<[f64; 2]> },

    #[error("invalid constraint set: {0}")]
    Constraint(String),

    #[error("linear solve failed ({size} unknowns): {reason}")]
    LinearSolve { size: usize, reason: String },

    #[error(
        "nonlinear iteration did not converge after {iterations} iterations (last update {last_update:e})"
    )]
    NonConvergence {
        iterations: usize,
        last_update: f64,
        last: Box<FieldSolution>,
    },

    #[error("{0}")]
    Analysis(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("config field `{field}`: {message}")]
    ConfigField { field: String, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn location_suffix(location: &Option<[f64; 2]>) -> String {
    match location {
        Some([x, y]) => format!(" at node ({x}, {y}): both Dirichlet and periodic slave"),
        None => ": both Dirichlet and periodic slave".to_string(),
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
