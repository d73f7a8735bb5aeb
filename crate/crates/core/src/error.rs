use thiserror::Error;

/// Errors surfaced by the samplers and their building blocks.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// A BPS reflection was requested at a point where the gradient vanishes.
    /// The event rate is zero there, so a correct simulator never asks for it.
    #[error("degenerate gradient (norm {norm:.3e}) at a BPS reflection")]
    DegenerateGradient { norm: f64 },

    #[error("event budget exceeded: {events} events (cap {cap})")]
    BudgetExceeded { events: usize, cap: usize },

    #[error("trajectory window exceeded the horizon cap of {cap} time units")]
    HorizonExceeded { cap: f64 },

    #[error("inconsistent path skeleton: {0}")]
    InconsistentSkeleton(String),

    #[error("degenerate chain: all samples identical")]
    DegenerateChain,

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
