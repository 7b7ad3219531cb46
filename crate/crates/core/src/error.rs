use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: edge weight must be positive and finite, got {weight}")]
    NonPositiveWeight { line: usize, weight: String },

    #[error("line {line}: weight {weight} carries more than 15 significant digits")]
    ExcessPrecision { line: usize, weight: String },

    #[error("duplicate edge {u} -- {v}")]
    DuplicateEdge { u: String, v: String },

    #[error("self-loop at vertex {0}")]
    SelfLoop(String),

    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("graph has no edges")]
    EmptyGraph,

    #[error("unknown vertex {0}")]
    UnknownVertex(String),

    #[error("{what} exceeds capacity {limit} (got {actual}); {hint}")]
    Capacity {
        what: &'static str,
        limit: usize,
        actual: usize,
        hint: &'static str,
    },

    #[error("target unreachable from state {state:#x}")]
    InfiniteHitting { state: u64 },

    #[error("transition {from:#x} -> {to:#x} is not strictly increasing")]
    NotIncreasing { from: u64, to: u64 },

    #[error("invalid transition rate {rate} out of state {state:#x}")]
    InvalidRate { state: u64, rate: f64 },

    #[error("h is not monotone: h({to:#x}) = {h_to} > h({from:#x}) = {h_from}")]
    Monotonicity {
        from: u64,
        to: u64,
        h_from: f64,
        h_to: f64,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Process exit code used by the CLI: 2 for usage/config problems,
    /// 3 for capacity limits.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 3,
            Error::Internal(_) => 1,
            _ => 2,
        }
    }
}
