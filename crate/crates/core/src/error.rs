use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    /// All score differences are identical, so the variance estimate is exactly zero.
    #[error("zero variance: {0}")]
    ZeroVariance(String),

    #[error("variance estimate nonpositive ({value:e}) with lag {lag}; reduce the lag")]
    NonpositiveVariance { value: f64, lag: usize },

    #[error("no events observed: {0}")]
    NoEvents(String),

    #[error("forecast value {x} exceeds the tilting bound {bound} of the observed count distribution")]
    TiltBound { x: f64, bound: f64 },

    #[error("degenerate observation distribution: no events were ever observed")]
    DegenerateObservations,

    #[error("{}:{line}: {msg}", path.display())]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// True for failures caused by the numbers themselves (degenerate variances,
    /// violated resampling bounds) rather than by malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::ZeroVariance(_)
                | Error::NonpositiveVariance { .. }
                | Error::TiltBound { .. }
                | Error::DegenerateObservations
                | Error::NoEvents(_)
        )
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub(crate) fn dims(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
