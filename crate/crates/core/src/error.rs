use thiserror::Error;

pub type Result<T, E = KoptError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum KoptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("edge list is empty")]
    EmptyInput,

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("graph has {n} nodes, above the dense limit of {limit}; use a sketch-based selector")]
    DenseLimit { n: usize, limit: usize },

    #[error("node {0} is out of range")]
    NodeOutOfRange(usize),

    #[error("pair ({0}, {0}) is not an edge candidate")]
    SelfPair(usize),

    #[error("edge ({0}, {1}) already exists")]
    EdgeExists(usize, usize),

    #[error("budget k = {k} exceeds the {candidates} candidate edges")]
    BudgetTooLarge { k: usize, candidates: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("solver did not converge after {iterations} iterations (relative L-norm bound {achieved:.3e}, target {target:.3e})")]
    SolverNotConverged {
        iterations: usize,
        achieved: f64,
        target: f64,
    },

    #[error("every member pair of the extreme subset is already an edge; widen the subset")]
    HullExhausted,

    #[error("extreme subset of {points} points exceeds {limit} members; raise mu or prune the cloud")]
    HullTooLarge { limit: usize, points: usize },

    #[error("Sherman-Morrison denominator {0} is not positive")]
    Denominator(f64),

    #[error("brute force needs {subsets} subsets, above the limit of {limit}")]
    BruteForceLimit { subsets: u128, limit: u128 },

    #[error("sketch cache: {0}")]
    Cache(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
