use thiserror::Error;

/// A `(mode, index)` pair identifying one slice, both 0-based.
pub type SliceId = (usize, usize);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("mode index {mode} out of range for a {num_modes}-mode tensor")]
    ModeOutOfRange { mode: usize, num_modes: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid tensor: {0}")]
    InvalidTensor(String),

    #[error("tensor has zero slices: {}", format_slices(.0))]
    ZeroSlices(Vec<SliceId>),

    #[error("target component s[{}][{}] = {value} is not positive", .slice.0 + 1, .slice.1 + 1)]
    NonPositiveTarget { slice: SliceId, value: f64 },

    #[error("incompatible targets: mode totals range over [{min}, {max}]")]
    IncompatibleTargets { min: f64, max: f64 },

    #[error("exponent sum {value} exceeds cap {cap}")]
    ExponentOverflow { value: f64, cap: f64 },

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("tensor has no positive entries")]
    EmptySupport,

    #[error("simplex exceeded {0} pivots")]
    SimplexIterationLimit(usize),

    #[error("linear program is unbounded")]
    UnboundedLp,

    #[error("linear program starting point is infeasible")]
    InfeasibleStart,

    #[error("matrix is not symmetric (asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("Hessian factorization failed after ridge retry")]
    HessianFactorization,

    #[error("instance generation failed after {0} attempts")]
    GeneratorExhausted(usize),

    #[error("invalid options: {0}")]
    InvalidOptions(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("{0}")]
    Io(String),
}

fn format_slices(slices: &[SliceId]) -> String {
    slices
        .iter()
        .map(|(k, i)| format!("({},{})", k + 1, i + 1))
        .collect::<Vec<_>>()
        .join(", ")
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
