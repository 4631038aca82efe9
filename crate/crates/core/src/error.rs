use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("stiffness quadrature value {value} is not positive on triangle {triangle}")]
    NonPositiveCoefficient { triangle: usize, value: f64 },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("diagonal entry {index} is not positive ({value})")]
    NonPositiveDiagonal { index: usize, value: f64 },

    #[error("singular 2x2 point block at dof {0}")]
    SingularPointBlock(usize),

    #[error("matrix is singular")]
    Singular,

    #[error("eigenvalue iteration did not converge")]
    EigenNoConvergence,

    #[error("dense dimension {dim} exceeds cap {cap}")]
    DenseCapExceeded { dim: usize, cap: usize },

    #[error("distributive smoothing requires tau > 0")]
    ZeroTau,

    #[error("coarsest level {0} has no free degrees of freedom")]
    EmptyCoarseLevel(usize),

    #[error("invalid hierarchy levels: coarse {coarse}, fine {fine}")]
    InvalidLevels { coarse: u32, fine: u32 },

    #[error("coefficients a and b differ")]
    CoefficientMismatch,

    #[error("invalid config field `{field}`: {reason}")]
    Config { field: String, reason: String },

    #[error("unknown table id `{0}`")]
    UnknownTable(String),

    #[error("matrix market parse error at line {line}: {reason}")]
    MatrixMarket { line: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }
}
