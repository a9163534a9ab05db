use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// A model, payoff, or demand parameter failed validation.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An exponential moment left the floating range; the risk aversion is
    /// unusable for the given claim-size atoms.
    #[error("exponential moment overflow: rho = {rho}")]
    MomentOverflow { rho: f64 },

    /// The backward integration produced a non-finite value.
    #[error("solver produced non-finite value at t = {t}, node {node}")]
    NonFinite { t: f64, node: usize },

    /// A surface was queried outside its time domain.
    #[error("time {t} outside [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    /// A surface for the requested quantity k is not available.
    #[error("no surface solved for k = {k}")]
    MissingSurface { k: f64 },

    /// The seller transform surface is non-positive; the log is undefined.
    #[error("seller transform g = {g} is not positive at (c = {c}, t = {t})")]
    TransformBreakdown { g: f64, c: f64, t: f64 },

    /// Configuration file could not be read or parsed.
    #[error("config error: {0}")]
    Config(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
