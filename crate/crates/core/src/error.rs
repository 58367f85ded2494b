use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid snapshot: {0}")]
    InvalidSnapshot(String),

    #[error("resolution failure at node {node}: {reason}")]
    Resolution { node: usize, reason: String },

    #[error("{op} is not applicable to {mode} snapshots")]
    NotApplicable { op: &'static str, mode: String },

    #[error("curve is not a radial graph (node {node})")]
    NotRadialGraph { node: usize },

    #[error("interpolation failed: {0}")]
    Interpolation(String),

    #[error("kernel time {kernel_t} must exceed snapshot time {t}")]
    KernelTime { kernel_t: f64, t: f64 },

    #[error("quadrature did not converge (estimates {trace:?})")]
    Quadrature { trace: Vec<f64> },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("trajectory did not terminate by blow-up")]
    NoBlowup,

    #[error("requested scale {sigma} needs time {t} outside trajectory coverage [{first}, {last}]")]
    Coverage { sigma: f64, t: f64, first: f64, last: f64 },

    #[error("no curve nodes inside the annulus {inner} <= |x| <= {outer}")]
    EmptyAnnulus { inner: f64, outer: f64 },

    #[error("branch clustering is ambiguous: {0}")]
    AmbiguousClustering(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub(crate) fn snapshot(msg: impl Into<String>) -> Self {
        Error::InvalidSnapshot(msg.into())
    }
}
