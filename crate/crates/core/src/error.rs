use thiserror::Error;

/// Errors raised anywhere in the fPCA / rotation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("point {point} lies outside the interval [{lo}, {hi}]")]
    Domain { point: f64, lo: f64, hi: f64 },

    #[error("derivative order {requested} is not supported by an order-{order} B-spline basis")]
    UnsupportedDerivative { requested: usize, order: usize },

    #[error("basis has a non-diagonal Gram matrix and cannot be orthonormalized by scaling")]
    UnsupportedBasis,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite integrand value at t = {t}")]
    Evaluation { t: f64 },

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("basis Gram matrix is numerically singular")]
    BasisConditioning,

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("degenerate matrix: {0}")]
    Degenerate(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Name of the pipeline stage an error belongs to, used in CLI messages.
    pub fn module(&self) -> &'static str {
        match self {
            Error::Domain { .. }
            | Error::UnsupportedDerivative { .. }
            | Error::UnsupportedBasis => "basis",
            Error::Evaluation { .. } => "quadrature",
            Error::Fit(_) => "smoothing",
            Error::InsufficientData(_) | Error::BasisConditioning => "fpca",
            Error::NonFinite | Error::Degenerate(_) => "linalg",
            Error::Parameter(_) => "config",
            Error::Parse { .. } => "input",
            Error::Io(_) => "io",
        }
    }

    /// Process exit code: 2 for malformed input or configuration, 1 for I/O,
    /// 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Parameter(_) => 2,
            Error::Io(_) => 1,
            _ => 3,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
