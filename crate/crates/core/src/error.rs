use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = MgError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum MgError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "k = {k} exceeds the Walsh block size m = {m} (largest power of 2 not exceeding n = {n})"
    )]
    WalshTooManyRows { k: usize, m: usize, n: usize },

    #[error("Gaussian draw was numerically rank deficient twice (n = {n}, k = {k})")]
    RankDeficient { n: usize, k: usize },

    #[error("{0} requires an unconditional body; simplex is not unconditional")]
    NotUnconditional(&'static str),

    #[error("{what} is only defined for k = 1 (got k = {k})")]
    RequiresUnivariate { what: &'static str, k: usize },

    #[error("grid spacing {h} is too coarse for t = {t} (need h <= t/10)")]
    Resolution { h: f64, t: f64 },

    #[error("density `{0}` is not continuously differentiable")]
    NotSmooth(String),

    #[error("matching size {n} exceeds the cap of {cap}")]
    MatchingTooLarge { n: usize, cap: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {msg}")]
    Parse { path: PathBuf, msg: String },
}

impl MgError {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        MgError::InvalidArgument(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        MgError::Io {
            path: path.into(),
            source,
        }
    }
}
