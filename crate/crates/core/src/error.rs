use thiserror::Error;

/// Errors reported by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is empty")]
    EmptyMatrix,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("SVD did not converge after {0} sweeps")]
    SvdNoConvergence(usize),

    #[error("power iteration start vector vanished after {0} attempts")]
    DegenerateStart(usize),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("level {level} out of range (tree depth {depth})")]
    LevelOutOfRange { level: usize, depth: usize },

    #[error("dimension {n} exceeds the configured cap {cap}")]
    CapExceeded { n: usize, cap: usize },

    #[error("format error: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short stable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyMatrix => "empty_matrix",
            Error::NonFinite => "non_finite",
            Error::SvdNoConvergence(_) => "svd_no_convergence",
            Error::DegenerateStart(_) => "degenerate_start",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::Domain(_) => "domain",
            Error::InvalidConfig(_) => "invalid_config",
            Error::LevelOutOfRange { .. } => "level_out_of_range",
            Error::CapExceeded { .. } => "cap_exceeded",
            Error::Format(_) => "format",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
