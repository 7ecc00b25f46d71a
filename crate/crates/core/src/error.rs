use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("stability gate violated: T*N^2/M = {ratio:.4} > 0.5 (N={n}, M={m}, T={t_final})")]
    Stability {
        ratio: f64,
        n: usize,
        m: usize,
        t_final: f64,
    },

    #[error("invalid profile: {0}")]
    InvalidProfile(String),

    #[error("noise index out of range: time index {j} (M={m})")]
    NoiseIndex { j: usize, m: usize },

    #[error("kernel evaluated at t={t:e} below floor {floor:e}")]
    BelowTimeFloor { t: f64, floor: f64 },

    #[error("quadrature produced a non-finite value ({0})")]
    Quadrature(String),

    #[error("implicit solve did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("coefficient validation failed: {0}")]
    Coefficients(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("mismatched inputs: {0}")]
    Mismatch(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
