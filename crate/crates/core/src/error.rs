use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("matrix must be square, got {rows}x{cols}")]
    NonSquare { rows: usize, cols: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix dimension {0} exceeds the supported maximum of 16")]
    TooLarge(usize),

    #[error("matrix contains non-finite entries")]
    NonFinite,

    #[error("singular matrix")]
    Singular,

    #[error("unstable system: A is not Hurwitz")]
    UnstableSystem,

    #[error("quadrature failure on [{lo}, {hi}]: error estimate {estimate:e} above tolerance {tol:e}")]
    QuadratureFailure {
        lo: f64,
        hi: f64,
        estimate: f64,
        tol: f64,
    },

    #[error("zero-capacity channel")]
    ZeroCapacity,

    #[error("zero-rate code: distortion {d} is not below any source eigenvalue")]
    ZeroRateCode { d: f64 },

    #[error("infeasible root: no positive blocklength satisfies the rate relation at eps = {eps}")]
    InfeasibleRoot { eps: f64 },

    #[error("never succeeds: eps = {0} must be below 1")]
    NeverSucceeds(f64),

    #[error("series failure: truncation not reached within {0} terms")]
    SeriesFailure(usize),

    #[error("empty input")]
    EmptyInput,

    #[error("no feasible points")]
    NoFeasiblePoints,
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
