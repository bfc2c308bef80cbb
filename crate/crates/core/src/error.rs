use thiserror::Error;

/// Errors reported by every fallible operation in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid profile: {0}")]
    InvalidProfile(String),
    #[error("degenerate point: {0}")]
    Degenerate(String),
    #[error("unsupported dimension {0}")]
    UnsupportedDimension(usize),
    #[error("meshing failed: {0}")]
    Meshing(String),
    #[error("assembly failed: {0}")]
    Assembly(String),
    #[error("solver failed: {0}")]
    Solver(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("evaluation failed: {0}")]
    Evaluation(String),
    #[error("root solve failed: {0}")]
    NoConvergence(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input rather than numerics.
    pub fn is_config(&self) -> bool {
        matches!(
            self,
            Error::Config(_) | Error::Parse(_) | Error::Json(_) | Error::InvalidProfile(_) | Error::UnsupportedDimension(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
