use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("series must hold at least one coefficient")]
    EmptySeries,

    #[error("point {0} lies outside [-1, 1]")]
    OutOfDomain(f64),

    #[error("unsupported derivative order {0} (expected 0, 1 or 2)")]
    UnsupportedOrder(usize),

    #[error("second-derivative expansion needs degree >= 3, got {0}")]
    DegenerateExpansion(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("constraint rows are rank deficient (rank {rank} < {rows})")]
    RankDeficient { rank: usize, rows: usize },

    #[error("too many constraints: {rows} rows on a space of dimension {dim}")]
    TooManyConstraints { rows: usize, dim: usize },

    #[error("projected operator {operator} is singular on the trial space")]
    SingularOperator { operator: String },

    #[error("correction basis was prepared for {prepared}, not {requested}")]
    OperatorMismatch { prepared: String, requested: String },

    #[error("zeroth-order coefficient is zero; the recursive main step is undefined, use the dense solver")]
    ZeroAlpha,

    #[error("mode (0, 0) has no {0} component")]
    MeanMode(&'static str),

    #[error("mode ({n1}, {n2}): {source}")]
    Mode {
        n1: i64,
        n2: i64,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite value in {term} at t = {t}")]
    NonFinite { term: String, t: f64 },

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),

    #[error("checkpoint {what} mismatch: expected {expected}, found {found}")]
    CheckpointDims {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("numerical failure at step {step}: {source}")]
    StepFailed {
        step: u64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn at_mode(self, n1: i64, n2: i64) -> Self {
        Error::Mode {
            n1,
            n2,
            source: Box::new(self),
        }
    }
}
