use thiserror::Error;

use crate::circuits::CircuitKind;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("scan input is empty")]
    EmptyInput,

    #[error("modulus mismatch: {left} vs {right}")]
    ModulusMismatch { left: u64, right: u64 },

    #[error("a circuit needs at least one slot")]
    ZeroSlots,

    #[error("expected {expected} elements, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("operator has no identity element, required by {0}")]
    MissingIdentity(&'static str),

    #[error("{n} elements cannot be split over {workers} workers")]
    TooFewElements { n: usize, workers: usize },

    #[error("{n} elements do not divide evenly over {workers} workers")]
    UnevenDivision { n: usize, workers: usize },

    #[error("{kind} circuit cannot be used for {context}")]
    UnsupportedCircuit { kind: CircuitKind, context: &'static str },

    #[error("invalid plan: {0}")]
    InvalidPlan(String),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("output differs from the sequential oracle at index {index}")]
    OracleMismatch { index: usize },

    #[error("weak-scaling delta {delta} does not equal {expected}")]
    WeakScalingMismatch { delta: i64, expected: i64 },

    #[error("execution exceeded the watchdog deadline of {0:?}")]
    Watchdog(std::time::Duration),

    #[error("worker thread panicked: {0}")]
    WorkerPanic(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
