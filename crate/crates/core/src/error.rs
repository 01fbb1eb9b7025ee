use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),
    #[error("truncated region has no usable mass: shape={shape}, scale={scale}, lo={lo}, hi={hi} ({detail})")]
    Underflow {
        shape: f64,
        scale: f64,
        lo: f64,
        hi: f64,
        detail: String,
    },
    #[error("domain error: {0}")]
    Domain(String),
    #[error("degenerate Frechet mean: eigenvalues {0} and {1} tie")]
    DegenerateMean(f64, f64),
    #[error("degenerate state: {0}")]
    Degenerate(String),
    #[error("mode error: {0}")]
    Mode(String),
    #[error("non-finite state at iteration {iteration}: {what}")]
    NonFinite { iteration: usize, what: String },
    #[error("no posterior draws available")]
    EmptyDraws,
    #[error("at least {needed} draws required, got {got}")]
    TooFewDraws { needed: usize, got: usize },
    #[error("undefined: {0}")]
    Undefined(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config error: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Dimension(_) | Error::Mode(_) => 2,
            Error::Io { .. } => 1,
            _ => 3,
        }
    }
}
