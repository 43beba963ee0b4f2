use thiserror::Error;

/// Errors shared across the crate.
#[derive(Error, Debug)]
pub enum Error {
    #[error("delta = {0} is outside (0, 1)")]
    DeltaOutOfRange(String),

    #[error("delta = {0} is a dyadic rational (relative distance 0)")]
    DyadicDelta(String),

    #[error("level {level} outside the domain range {min}..={max}")]
    LevelOutOfRange { level: i32, min: i32, max: i32 },

    #[error("point {0} lies outside the domain window")]
    OutsideDomain(String),

    #[error("interval is not aligned to the mesh: {0}")]
    NotMeshAligned(String),

    #[error("interval length must be positive")]
    EmptyInterval,

    #[error("weight values must be strictly positive and finite")]
    NonPositiveWeight,

    #[error("mesh values must be finite")]
    NonFiniteValue,

    #[error("exponent p = {0} is below 1")]
    ExponentBelowOne(f64),

    #[error("value array length {got} does not match the domain cell count {want}")]
    BadValueCount { got: usize, want: usize },

    #[error("no grid interval of length >= 2^-L fits inside the query interval")]
    NoInnerInterval,

    #[error("open-set family is empty")]
    EmptyOmegaFamily,

    #[error("grid does not resolve the requested operation: {0}")]
    Unresolvable(String),

    #[error("atom is invalid: {0}")]
    InvalidAtom(String),

    #[error("2D level {0} exceeds the hard cap of {1} for continuous rectangle scans")]
    LevelCapExceeded(i32, i32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("internal invariant violated: {0}")]
    Internal(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
