use num_bigint::BigUint;
use std::io;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Crate-wide error type. Variants split into configuration problems
/// (bad domains, parameters, or input files) and runtime failures; the
/// CLI maps the former to exit code 2 and the latter to exit code 1.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("node (depth {depth}, index {index}) not found in tree")]
    MissingNode { depth: u32, index: BigUint },

    #[error("node (depth {depth}, index {index}) is already expanded")]
    NodeExpanded { depth: u32, index: BigUint },

    #[error("objective '{0}' has a nonzero noise channel; this optimizer requires exact evaluations")]
    NoisyObjective(String),

    #[error("objective '{0}' has no cached optimum; compute one with grid_optimum first")]
    MissingKnownMax(String),

    #[error("grid of {total} points exceeds the enumeration guard of {limit}")]
    GridTooLarge { total: u128, limit: u128 },

    #[error("operation supports {supported}-dimensional domains only, got {got}")]
    UnsupportedDimension { supported: usize, got: usize },

    #[error("degenerate packing counts: {0}")]
    DegenerateCounts(String),

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Process exit code for this error: 2 for configuration mistakes,
    /// 1 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidDomain(_)
            | Error::InvalidParams(_)
            | Error::NoisyObjective(_)
            | Error::UnsupportedDimension { .. }
            | Error::Config(_)
            | Error::Parse(_) => 2,
            _ => 1,
        }
    }
}
