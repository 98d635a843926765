use thiserror::Error;

/// Errors raised while building instances or running solvers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown topology kind `{0}`")]
    UnknownTopology(String),

    #[error("invalid topology parameters: {0}")]
    InvalidTopology(String),

    #[error("edge list line {line}: {reason}")]
    EdgeList { line: usize, reason: String },

    #[error("invalid placement: {0}")]
    Placement(String),

    #[error("learner {learner} is unreachable from source {source_node}")]
    Unreachable { source_node: usize, learner: usize },

    #[error("inconsistent instance: {0}")]
    Instance(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("linear program failed: {0}")]
    Lp(String),

    #[error("quadratic program failed: {0}")]
    Qp(String),

    #[error("numerical overflow in primal-dual round {round}: {detail}")]
    Overflow { round: usize, detail: String },

    #[error("locality violation: {0}")]
    Locality(String),

    #[error("did not converge after {0} iterations")]
    NoConvergence(usize),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
