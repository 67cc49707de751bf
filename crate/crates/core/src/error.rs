use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("spatial dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("empty set argument: {0}")]
    EmptySet(&'static str),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("base m={m} is not admissible here: {reason}")]
    BadBase { m: u32, reason: String },

    #[error("scale cap {0} is finer than the grid resolution")]
    ScaleBelowResolution(String),

    #[error("pole {0:?} is not inside the domain")]
    PoleOutsideDomain(Vec<f64>),

    #[error("walk exceeded max_steps = {0}; lower dt or raise max_steps")]
    MaxStepsExceeded(u32),

    #[error("domains are not nested: {0}")]
    NotNested(String),

    #[error("quadrature failed: {0}")]
    Quadrature(String),

    #[error("tree hypothesis fails: {count} cube(s) are neither type 1 nor type 2 (first: {first})")]
    NotApplicable { count: usize, first: String },

    #[error("constant search exhausted at m <= {bound} for n = {n}")]
    SearchExhausted { n: u32, bound: u64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
