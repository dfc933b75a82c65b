use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("topology generation failed after {retries} retries: {detail}")]
    Generation { retries: usize, detail: String },

    #[error("typology injection failed: {0}")]
    Injection(String),

    #[error("transactions not sorted by (timestamp, tx_id) at position {position}")]
    Unsorted { position: usize },

    #[error("vertex {vertex} out of range for a graph with {count} vertices")]
    VertexOutOfRange { vertex: u64, count: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("training split has no labeled training vertices")]
    EmptyTrainSet,

    #[error("training diverged at epoch {epoch}: loss = {loss}")]
    Diverged { epoch: usize, loss: f64 },

    #[error("sampling distribution undefined: operator has no nonzero column")]
    ZeroOperator,

    #[error("stale dirty set: stamped at epoch {stamped}, engine is at epoch {current}")]
    StaleDirtySet { stamped: u64, current: u64 },

    #[error("unknown account id {0}")]
    UnknownAccount(u64),

    #[error("malformed input: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
