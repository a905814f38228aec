use thiserror::Error;

/// Errors surfaced by the training stack.
#[derive(Debug, Error)]
pub enum Error {
    /// Bad or inconsistent configuration (unknown ids, invalid knobs).
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller broke an operation's precondition (shape mismatch, bad action index).
    #[error("contract violation: {0}")]
    Contract(String),

    /// A computation produced NaN or infinity; the affected state is left untouched.
    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("cannot sample from an empty {0}")]
    Empty(&'static str),

    #[error("clustering failed: {0}")]
    Clustering(String),

    /// Statistic undefined for the given samples (e.g. zero variance).
    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("checkpoint format: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
