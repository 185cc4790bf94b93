use thiserror::Error;

use crate::solver::Snapshot;

#[derive(Debug, Error)]
pub enum FemError {
    #[error("mesh error: {0}")]
    Mesh(String),

    #[error("mesh parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("boundary condition error: {0}")]
    Bc(String),

    #[error("material evaluation failed in element {element}: {source}")]
    Material {
        element: usize,
        #[source]
        source: electropann::Error,
    },

    #[error("invalid load schedule: {0}")]
    Schedule(String),

    #[error("linear solve failed: {0}")]
    Linear(String),

    #[error("Newton did not converge at load factor {lambda} (residual history {history:?})")]
    NewtonFailure { lambda: f64, history: Vec<f64> },

    #[error("load stepping stopped; last converged load factor {last_lambda}")]
    StepFailure { last_lambda: f64, completed: Vec<Snapshot> },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = FemError> = std::result::Result<T, E>;
