use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: String,
        got: String,
    },

    #[error("invalid MDP: {0}")]
    InvalidMdp(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("value iteration did not converge within {iterations} iterations (last sup-norm change {last_delta:e})")]
    Convergence { iterations: usize, last_delta: f64 },

    #[error("occupation measure vanishes at state {state}; mismatch coefficient undefined (initial distribution must be strictly positive)")]
    DegenerateOccupation { state: usize },

    #[error("recursion check needs at least {need} seeds, got {got}; rerun with more seeds")]
    InsufficientSeeds { got: usize, need: usize },

    #[error("checkpoint spacing must be 1 for recursion checks (got diag_every = {0}); rerun with diag_every = 1")]
    CheckpointSpacing(usize),

    #[error("assumption violated: {0}")]
    AssumptionViolated(String),

    #[error("seed {seed}, iteration {iter}: {source}")]
    AtIteration {
        seed: usize,
        iter: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn dim(what: &'static str, expected: impl ToString, got: impl ToString) -> Error {
    Error::Dimension {
        what,
        expected: expected.to_string(),
        got: got.to_string(),
    }
}
