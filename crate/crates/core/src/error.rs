use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("graph must have at least one node")]
    EmptyGraph,
    #[error("edge ({src},{dst}) has zero weight")]
    ZeroWeight { src: usize, dst: usize },
    #[error("edge weight of ({src},{dst}) is not finite")]
    NonFiniteWeight { src: usize, dst: usize },
    #[error("node id {id} out of range for a graph with {n} nodes")]
    NodeOutOfRange { id: usize, n: usize },
    #[error("duplicate edge ({src},{dst})")]
    DuplicateEdge { src: usize, dst: usize },
    #[error("self-loop on node {node}")]
    SelfLoop { node: usize },
    #[error("undirected graph is missing the reverse of edge ({src},{dst}) with equal weight")]
    AsymmetricUndirected { src: usize, dst: usize },
    #[error("natural frequency vector has length {got}, expected {expected}")]
    FrequencyLength { expected: usize, got: usize },
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("could not generate a weakly connected graph after {retries} attempts")]
    Unattainable { retries: usize },
    #[error("{what} requires n <= {cap}, got n = {n}")]
    CapExceeded { what: &'static str, n: usize, cap: usize },
    #[error("graph is not a single directed cycle")]
    NotACycle,
    #[error("initial phase of input node {node} must be 0, got {value}")]
    PinnedPhaseNonzero { node: usize, value: f64 },
    #[error("simulation diverged at t = {time}")]
    Diverged { time: f64 },
    #[error("no initial phases satisfy the admissible intervals")]
    Infeasible,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}
