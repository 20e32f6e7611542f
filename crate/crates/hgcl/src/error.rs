use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("curvature must be strictly negative, got {0}")]
    InvalidCurvature(f64),

    #[error("dimension must be at least 1")]
    ZeroDimension,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("points live on different manifolds")]
    ManifoldMismatch,

    #[error("operation `{op}` is only defined on the {expected} model")]
    WrongModel { op: &'static str, expected: &'static str },

    #[error("point is not on the manifold: {0}")]
    OffManifold(String),

    #[error("vector is not tangent at its base point (residual {0:e})")]
    NotTangent(f64),

    #[error("result reached the ball boundary in `{0}`")]
    BoundaryOverflow(&'static str),

    #[error("non-finite value produced by primitive `{op}` (node {node})")]
    NonFinite { op: &'static str, node: usize },

    #[error("non-finite loss at epoch {epoch}: task={task}, hpc={hpc}")]
    DivergedLoss { epoch: usize, task: f64, hpc: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampling pool too small for anchor {anchor}: {available} candidates, {requested} requested")]
    PoolTooSmall {
        anchor: usize,
        available: usize,
        requested: usize,
    },

    #[error("empty mask")]
    EmptyMask,

    #[error("unknown node id {0}")]
    UnknownNode(usize),

    #[error("graph error: {0}")]
    Graph(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
