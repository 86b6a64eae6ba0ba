use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("battery level {level} out of range 0..={max}")]
    LevelOutOfRange { level: usize, max: usize },

    #[error("relay index {index} out of range for {relays} relays")]
    RelayOutOfRange { index: usize, relays: usize },

    #[error("negative energy {0}")]
    NegativeEnergy(f64),

    #[error("relay at stored energy {stored} cannot supply required power {required}")]
    InsufficientEnergy { stored: f64, required: f64 },

    #[error("joint state space has {states} states, above the cap of {cap}")]
    StateCapExceeded { states: usize, cap: usize },

    #[error("steady-state solver did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not row-stochastic: {0}")]
    NotStochastic(String),

    #[error("unknown sweep axis `{0}`")]
    UnknownAxis(String),

    #[error("sweep value {value} does not fit axis `{axis}`")]
    BadSweepValue { axis: &'static str, value: String },
}
