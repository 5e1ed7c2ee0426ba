use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("λ = {lambda} is numerically a generalized eigenvalue (condition number {cond:.3e})")]
    SingularAtLambda { lambda: Complex64, cond: f64 },
    #[error("pencil is not regular along the sampled ray: {0}")]
    NotRegularOnRay(String),
    #[error("rank sequence still decreasing at p_max = {p_max}: ranks {ranks:?}")]
    NoStagnation { p_max: usize, ranks: Vec<usize> },
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("restricted A is not invertible on the kernel spaces: {0}")]
    AKerSingular(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("non-finite value of F at λ = {0}")]
    NonFiniteSample(Complex64),
    #[error("truncation tail bound {0:.3e} exceeds 1e-10")]
    TailTooLarge(f64),
    #[error("vector is not in X_ran (distance {0:.3e})")]
    NotInXran(f64),
    #[error("X_ran and ker E intersect (smallest principal angle {0:.3e})")]
    DisjointnessViolated(f64),
    #[error("initial value is inconsistent (projection distance {0:.3e})")]
    InconsistentInitialValue(f64),
    #[error("solution methods disagree (relative difference {0:.3e})")]
    SolverMismatch(f64),
    #[error("inhomogeneity cannot be lifted through E (residual {0:.3e})")]
    LiftFailed(f64),
    #[error("decomposition unavailable: {0}")]
    DecompositionUnavailable(String),
    #[error("sampled inhomogeneity carries no derivative data")]
    SmoothnessInsufficient,
    #[error("bad shape: {0}")]
    BadShape(String),
    #[error("generation failed: {0}")]
    GenerationFailed(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by malformed or inadmissible input, as opposed
    /// to numerical breakdown.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::ShapeMismatch(_)
                | Error::BasisMismatch(_)
                | Error::DimensionMismatch(_)
                | Error::NotInXran(_)
                | Error::DisjointnessViolated(_)
                | Error::InconsistentInitialValue(_)
                | Error::SmoothnessInsufficient
                | Error::BadShape(_)
                | Error::InvalidInput(_)
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
