use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("insufficient history: model order {needed}, history holds {available}")]
    InsufficientHistory { needed: usize, available: usize },

    #[error("(A, C) is not observable: observability rank {rank} < {n}")]
    Unobservable { rank: usize, n: usize },

    #[error("pole placement failed: {0}")]
    PlacementFailure(String),

    #[error("truncation tolerance not reached within order {max_order} (relative norm {achieved:.3e})")]
    OrderOverflow { max_order: usize, achieved: f64 },

    #[error("Riccati iteration did not converge after {iterations} doublings (residual {residual:.3e})")]
    DareFailure { iterations: usize, residual: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
