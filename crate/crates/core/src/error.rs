use crate::mesh::BoundaryTag;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("no boundary edges carry tag {0:?}")]
    EmptyBoundaryTag(BoundaryTag),

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("linear solve did not converge after {iterations} iterations (residual {residual:.3e})")]
    LinearSolveFailed { iterations: usize, residual: f64 },

    #[error("eigenvalue iteration did not converge after {iterations} iterations")]
    EigenIterationFailed { iterations: usize },

    #[error("linear system is singular")]
    SingularSystem,

    #[error("mesh file, line {line}: {msg}")]
    MeshFormat { line: usize, msg: String },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
