//! Error type shared by the numerical modules.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// The input file is missing a required column or is otherwise unreadable.
    #[error("schema error: {0}")]
    Schema(String),

    /// Two stored observations share the same (entity, time, variable) key.
    #[error("conflicting duplicate observation for {0}")]
    DuplicateKey(String),

    /// A variable name was requested that is not registered in the dataset.
    #[error("unknown variable '{0}'")]
    UnknownVariable(String),

    /// Two variables have no (entity, time) key where both are present.
    #[error("no overlapping observations between '{a}' and '{b}'")]
    EmptyOverlap { a: String, b: String },

    /// A column or vector is constant where variation is required.
    #[error("zero variance: {0}")]
    ZeroVariance(String),

    /// Not enough observations for the requested computation.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// The design matrix is rank deficient.
    #[error("collinear design matrix: {0}")]
    Collinear(String),

    /// The instrument explains essentially none of the treatment variation,
    /// so the 2SLS ratio would divide by (numerical) zero.
    #[error("degenerate first stage: {0}")]
    DegenerateFirstStage(String),

    /// The instrument does not move the treatment at all across its groups.
    #[error("zero compliance: treatment mean identical across instrument groups")]
    ZeroCompliance,

    /// Fewer than two estimable instruments were supplied.
    #[error("insufficient instruments: {0}")]
    InsufficientInstruments(String),

    /// The random-proxy baseline is exactly zero, so the ratio is undefined.
    #[error("degenerate baseline: random-proxy delta is zero")]
    DegenerateBaseline,

    /// A numeric argument is outside its domain (NaN, infinite, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// Random redraws were exhausted before the requested sample was assembled.
    #[error("exhausted redraws: {0}")]
    Exhausted(String),

    /// An autoregressive coefficient specifies a non-stationary process.
    #[error("unstable coefficient: {0}")]
    Unstable(String),

    /// A configuration value is out of range.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
