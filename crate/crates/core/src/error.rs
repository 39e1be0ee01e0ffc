use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("parameter {theta:?} outside the uncertainty box of agent {agent}")]
    ParameterOutsideBox { agent: usize, theta: Vec<f64> },

    #[error(
        "agent {agent} has {count} uncertainty vertices, above the cap of {cap}; \
         reduce the number of uncertain parameters or collapse some of them"
    )]
    TooManyVertices { agent: usize, count: u128, cap: usize },

    #[error("polytope does not contain the origin in its interior (row {row} has bound {bound})")]
    OriginNotInterior { row: usize, bound: f64 },

    #[error("problem is infeasible: {0}")]
    Infeasible(String),

    #[error("solver failure: {0}")]
    Solver(String),

    #[error("rejection sampling exhausted after {0} attempts")]
    SamplingExhausted(usize),

    #[error("duplicate seed points at indices {0} and {1}")]
    DuplicateSeeds(usize, usize),

    #[error("point lies outside the bounding polytope")]
    OutsideDomain,

    #[error("graph is disconnected")]
    Disconnected,

    #[error("consensus did not converge in {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("model fingerprint mismatch: family built for {expected}, model is {actual}")]
    FingerprintMismatch { expected: String, actual: String },

    #[error("safety fault: {0}")]
    SafetyFault(String),

    #[error("every region was infeasible: {0}")]
    AllRegionsInfeasible(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
