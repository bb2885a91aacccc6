use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input")]
    Empty,

    #[error("argument {name} = {value} outside admissible range: {reason}")]
    Domain {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("non-finite function value at y = {y}")]
    NonFinite { y: f64 },

    #[error("singular system{}", context.as_deref().map(|c| format!(" ({c})")).unwrap_or_default())]
    Singular { context: Option<String> },

    #[error("system too ill-conditioned: condition estimate {condition:.3e} exceeds {threshold:.1e}")]
    IllConditioned { condition: f64, threshold: f64 },

    #[error("cross approximation stalled at rank {rank}: residual {residual:.3e} > tolerance {tolerance:.3e}")]
    AcaNotConverged {
        rank: usize,
        residual: f64,
        tolerance: f64,
    },

    #[error("no convergence by N = {n_max}: last Cauchy error {last_error:.3e}")]
    NotConverged {
        n_max: usize,
        last_error: f64,
        history: Vec<(usize, f64)>,
    },

    #[error("gamma function overflow at {0}")]
    GammaOverflow(f64),

    #[error("I/O: {0}")]
    Io(String),

    #[error("malformed operator file: {0}")]
    Format(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
