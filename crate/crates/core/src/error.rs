use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in operator")]
    NonFinite,

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("operator is not positive semidefinite (min eigenvalue {0:.3e})")]
    NotPositive(f64),

    #[error("index {index} out of range for cutoff {cutoff}")]
    IndexOutOfRange { index: usize, cutoff: usize },

    #[error("quadrature density is negative ({0:.3e}) beyond clipping tolerance")]
    NegativeDensity(f64),

    #[error("quadrature grid too narrow: density {0:.3e} at the grid edge")]
    GridTooNarrow(f64),

    #[error("degenerate distribution: {0}")]
    Degenerate(String),

    #[error("empty sample set")]
    EmptySamples,

    #[error("heterodyne acceptance rate {0:.2e} below 1e-4; alpha_max is ill-chosen")]
    LowAcceptance(f64),

    #[error("integration residual {residual:.3e} exceeds {tolerance:.1e}; increase resolution")]
    ResolutionTooCoarse { residual: f64, tolerance: f64 },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
