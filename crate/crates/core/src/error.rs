use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("assignment has {got} variables but the model has {expected}")]
    Dimension { expected: usize, got: usize },

    #[error("{what} is {value}, over the cap of {cap} (raise the cap explicitly to proceed)")]
    ResourceCap {
        what: &'static str,
        value: usize,
        cap: usize,
    },

    #[error("kernel entries must all lie on the real or imaginary axis for phase-resolved contraction; use brute force instead")]
    UnsupportedKernel,

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("no assignment in bin {bin} after {draws} uniform draws; the bin is probably empty")]
    EmptyBinSuspected { bin: String, draws: u64 },

    #[error("estimator contract violated: {0}")]
    Contract(String),

    #[error("unsupported estimator: {0}")]
    UnsupportedEstimator(String),

    #[error("incomplete input: {0}")]
    Incomplete(String),

    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
