use thiserror::Error;

use crate::graph::{Model, Violation};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {}", join_violations(.0))]
    InvalidGraph(Vec<Violation>),

    #[error("invalid seed distribution: {0}")]
    InvalidSeedDistribution(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("model mismatch: expected {expected}, found {found}")]
    ModelMismatch { expected: Model, found: Model },

    #[error("instance too large for exact computation: {0}")]
    TooLarge(String),

    #[error("estimator degenerate on {undefined} of {total} pairs (limit {limit:.3})")]
    Degenerate {
        undefined: usize,
        total: usize,
        limit: f64,
    },

    #[error("normalization condition violated after rescaling at nodes {0:?}")]
    Normalization(Vec<usize>),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter()
        .map(ToString::to_string)
        .collect::<Vec<_>>()
        .join("; ")
}
