use thiserror::Error;

/// Errors raised by grid construction, field operations, solves and checks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has {found} values, grid expects {expected}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("non-finite value at node ({i}, {j})")]
    NonFinite { i: usize, j: usize },

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("node ({i}, {j}) is on the boundary; only interior evaluation is defined")]
    BoundaryPoint { i: usize, j: usize },

    #[error("node ({i}, {j}) is outside the grid")]
    OutOfGrid { i: usize, j: usize },

    #[error("empty index set: {0}")]
    EmptyMask(String),

    #[error(
        "matrix at node ({i}, {j}) is not positive definite (smallest eigenvalue {min_eig:e})"
    )]
    NotPositiveDefinite { i: usize, j: usize, min_eig: f64 },

    #[error("mapped grid leaves the source domain at corners {corners:?}")]
    EscapesDomain { corners: Vec<[f64; 2]> },

    #[error("config: {0}")]
    Config(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolated(String),

    #[error("solver did not converge after {iterations} iterations (gradient norm {grad_norm:e})")]
    NotConverged {
        iterations: usize,
        grad_norm: f64,
        best: Box<crate::grid::ScalarField>,
    },

    #[error("continuation failed at schedule position {position} (eps = {eps:e}): {source}")]
    Continuation {
        position: usize,
        eps: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("competitor differs from the reference on the mask boundary at node ({i}, {j})")]
    BoundaryMismatch { i: usize, j: usize },

    #[error("csv: {0}")]
    Csv(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
