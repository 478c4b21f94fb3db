//! Crate-wide error type.

/// Errors surfaced by density constructors, filter steps and the harness.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A weight vector carried no mass; the caller decides whether the
    /// owning hypothesis is dropped or the whole step fails.
    #[error("weight vector carries no mass")]
    ZeroWeightSum,

    /// A label universe was too large to enumerate its subsets.
    #[error("cannot enumerate hypotheses over {count} labels (cap {cap})")]
    EnumerationCap { count: usize, cap: usize },

    /// Every hypothesis of an update collapsed to zero likelihood.
    #[error("all hypotheses degenerate at step {step}")]
    DegenerateStep { step: u32 },

    /// An observation frame does not match the sensor that is scoring it.
    #[error("frame has {got} entries, sensor expects {expected}")]
    FrameMismatch { got: usize, expected: usize },

    /// A density or particle set violated a structural invariant.
    #[error("invalid density: {0}")]
    InvalidDensity(String),

    /// A model or scenario configuration is unusable.
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Too many Monte-Carlo runs failed for aggregates to be meaningful.
    #[error("{failed} of {total} runs failed (tolerated at most 10%): first failure: {first}")]
    TooManyFailedRuns {
        failed: usize,
        total: usize,
        first: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Serde {
        context: String,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
