use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("geometry violation: {0}")]
    Geometry(String),

    #[error("parameter layout mismatch: {0}")]
    Layout(String),

    #[error("non-finite value produced at tape node {node}")]
    NonFinite { node: usize },

    #[error("objective evaluation failed: {0}")]
    Evaluation(String),

    #[error("search direction is not a descent direction (slope {slope})")]
    NotDescent { slope: f64 },

    #[error("line search failed after {iters} iterations (best step {best_alpha})")]
    LineSearch { iters: usize, best_alpha: f64 },

    #[error("oracle failure: {0}")]
    Oracle(String),

    #[error("reference oracles disagree: max difference {max_diff:.3e}")]
    ReferenceInconsistency { max_diff: f64 },

    #[error("relative error undefined: reference has zero norm")]
    UndefinedMetric,

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("training aborted at epoch {epoch}: {reason}")]
    Aborted { epoch: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
