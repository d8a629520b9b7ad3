use thiserror::Error;

use crate::drmdp::Step;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("unknown {kind} `{name}`")]
    UnknownName { kind: &'static str, name: String },

    #[error("interval body length {len} is outside the interval law support (max {max})")]
    UnsupportedLength { len: usize, max: usize },

    #[error("no tabulated reward for segment {0:?}")]
    MissingReward(Vec<Step>),

    #[error("enumeration cap of {cap} exceeded while {what}")]
    EnumerationCap { cap: usize, what: &'static str },

    #[error("horizon {horizon} leaves discounted tail mass {tail:e} above tolerance")]
    HorizonInsufficient { horizon: usize, tail: f64 },

    #[error("fixed-point iteration did not converge in {sweeps} sweeps (residual {residual:e})")]
    NoConvergence { sweeps: usize, residual: f64 },

    #[error("tables are keyed by different segment sets")]
    KeyMismatch,

    #[error("policy has no action distribution for state {state} after history {history:?}")]
    MissingPolicyRow { history: Vec<Step>, state: usize },

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("numeric divergence: {0}")]
    Divergence(String),

    #[error("fixture `{fixture}`: {quantity} computed {computed}, expected {expected}")]
    FixtureMismatch { fixture: String, quantity: String, expected: f64, computed: f64 },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("snapshot checksum mismatch for section `{0}`")]
    Checksum(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
