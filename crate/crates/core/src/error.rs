use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("Hilbert space dimension {dim} exceeds the cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("ambiguous unfolding of {aliased_khz} kHz: candidates {candidates:?} all lie within {half_width_khz} kHz of the hint")]
    AmbiguousUnfold {
        aliased_khz: f64,
        candidates: Vec<f64>,
        half_width_khz: f64,
    },

    #[error("no unfolding of {aliased_khz} kHz lies within {half_width_khz} kHz of the hint")]
    OutOfBand { aliased_khz: f64, half_width_khz: f64 },

    #[error("fit did not converge after {iterations} iterations (best residual {best_residual:e})")]
    NonConvergence {
        iterations: usize,
        best_residual: f64,
        best_params: Vec<f64>,
    },

    #[error("unidentifiable: {0}")]
    Unidentifiable(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}
