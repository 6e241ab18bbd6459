use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("graph needs {nodes} qubits but the simulator budget is {budget}")]
    QubitBudget { nodes: usize, budget: usize },

    #[error("removing {removed} of {nodes} nodes leaves an empty graph")]
    EmptyGraph { nodes: usize, removed: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid permutation: {0}")]
    InvalidPermutation(String),

    #[error("invalid element index {index} (graph has {count} elements)")]
    InvalidElement { index: usize, count: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ground-truth targets unusable: {0}")]
    Targets(String),

    #[error("training diverged at epoch {epoch}: {detail}")]
    Divergence { epoch: usize, detail: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
