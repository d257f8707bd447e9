use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid norm: {0}")]
    InvalidNorm(String),

    #[error("invalid subspace: {0}")]
    InvalidSubspace(String),

    #[error("no exact strategy for {domain} -> {codomain} (dimension cap {cap})")]
    NoExactStrategy {
        domain: String,
        codomain: String,
        cap: usize,
    },

    #[error("enumeration too large: {0}")]
    EnumerationTooLarge(String),

    #[error("linear program infeasible")]
    LpInfeasible,

    #[error("linear program unbounded")]
    LpUnbounded,

    #[error("linear program failed: {0}")]
    LpFailed(String),

    #[error("iteration did not converge: best bracket [{lower}, {upper}]")]
    NotConverged { lower: f64, upper: f64 },

    #[error("{what} certification failed: residual {residual:e} > {tolerance:e}")]
    Certification {
        what: String,
        residual: f64,
        tolerance: f64,
    },

    #[error("inclusion violated: {0}")]
    Inclusion(String),

    #[error("not a direct sum: {0}")]
    NotDirectSum(String),

    #[error("perturbation hypothesis fails: sum of eps = {sum} >= 1/(2K) = {bound}")]
    PerturbationHypothesis { sum: f64, bound: f64 },

    #[error("perturbation bound for block {block} violated: measured {measured} > claimed {claimed}")]
    PerturbationBound {
        block: usize,
        measured: f64,
        claimed: f64,
    },

    #[error("rank collapse after perturbation: rank {rank} < {expected}")]
    RankCollapse { rank: usize, expected: usize },

    #[error("finite ambient exhausted (best delta {best_delta:e})")]
    Exhausted { best_delta: f64 },

    #[error("norm bound exceeded: {value} > cap {cap}")]
    CapExceeded { value: f64, cap: f64 },

    #[error("direct-sum condition ({condition}) fails: ||{which}|| = {lhs} > ||(x,y)|| = {rhs}")]
    SumCondition {
        condition: u8,
        which: &'static str,
        lhs: f64,
        rhs: f64,
    },

    #[error("precondition: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
