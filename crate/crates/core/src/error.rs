use std::fmt;

use thiserror::Error;

/// Constraint families of the k-round relaxation, used to say which one failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum ConstraintFamily {
    UnitEmpty,
    VertexSum,
    SameVertexOrthogonal,
    EdgeOrthogonal,
    Consistency,
    ColorSymmetry,
}

impl fmt::Display for ConstraintFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConstraintFamily::UnitEmpty => "unit empty-set vector",
            ConstraintFamily::VertexSum => "per-vertex color sum",
            ConstraintFamily::SameVertexOrthogonal => "same-vertex orthogonality",
            ConstraintFamily::EdgeOrthogonal => "edge same-color orthogonality",
            ConstraintFamily::Consistency => "union consistency",
            ConstraintFamily::ColorSymmetry => "color symmetry (marginal 1/3)",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("vertex {vertex} out of range for graph with {n} vertices")]
    VertexOutOfRange { vertex: usize, n: usize },

    #[error("coloring is improper on edge ({0}, {1})")]
    ImproperColoring(usize, usize),

    #[error("query of size {requested} exceeds relaxation round {round}")]
    UnsupportedRound { requested: usize, round: usize },

    #[error("constraint family '{family}' has residual {residual:e} above tolerance {tol:e}")]
    ConstraintResidual {
        family: ConstraintFamily,
        residual: f64,
        tol: f64,
    },

    #[error("matrix is not PSD: eigenvalue {eigenvalue:e} below -{rank_tol:e}")]
    NotPsd { eigenvalue: f64, rank_tol: f64 },

    #[error("degenerate projection: inner product {inner} is (anti)parallel")]
    DegenerateProjection { inner: f64 },

    #[error("precondition violated ({what}) at {vertices:?}")]
    PreconditionViolated { what: String, vertices: Vec<usize> },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate threshold: {0}")]
    DegenerateThreshold(String),

    #[error("truncation threshold t = {0} > 8 underflows the Gaussian tail")]
    TruncationUnderflow(f64),

    #[error("pruning exhausted the graph at stage {stage}")]
    PruneExhausted { stage: String },

    #[error("decomposition residual {residual:e} exceeds {tol:e}: {what}")]
    Decomposition { what: String, residual: f64, tol: f64 },

    #[error("graph is not 3-colorable: odd cycle {witness:?} inside the neighborhood of {center}")]
    NotThreeColorable { center: usize, witness: Vec<usize> },

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
