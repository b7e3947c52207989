use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// The query point lies strictly inside obstacle `obstacle`.
    #[error("point is interior to obstacle {obstacle} (signed distance {signed_distance:.3e} m)")]
    InteriorPoint {
        obstacle: usize,
        signed_distance: f64,
    },

    #[error("value outside the operation's domain: {0}")]
    Domain(String),

    #[error("vector norm {0:.3e} is too small to define a direction")]
    ZeroVector(f64),

    #[error("averaged normal vanishes; the obstacle damping matrix is undefined")]
    DegenerateNormal,

    #[error("basis is ill-conditioned (condition number {0:.3e})")]
    SingularBasis(f64),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("state became non-finite at step {step} (t = {time} s)")]
    NonFiniteState { step: usize, time: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
