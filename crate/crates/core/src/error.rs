use thiserror::Error;

/// Errors raised by set construction, conic queries and the separation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    Dimension {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("index {index} out of range for ambient dimension {dim}")]
    IndexOutOfRange { index: usize, dim: usize },

    #[error("set is empty")]
    EmptySet,

    #[error("problem is unbounded in the requested direction")]
    Unbounded,

    #[error("ray origin is not contained in the set")]
    OriginOutside,

    #[error("conic solver failed: {0}")]
    NumericalFailure(String),

    #[error("unsupported cone for this operation: {0}")]
    UnsupportedCone(String),

    #[error("no separation possible: {0}")]
    NoSeparation(String),

    #[error("no boundary candidate survived; increase the ray count or the inflation factor")]
    NoCandidates,

    #[error("all modes eliminated: model library cannot explain the measurements")]
    ModelInadequate,

    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            context,
            expected,
            got,
        })
    }
}
