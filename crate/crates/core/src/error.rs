use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised by the numerical core.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    /// A map returned a non-finite value while differentiating column `column`.
    #[error("evaluation failure: non-finite value while differentiating column {column}")]
    EvaluationFailure { column: usize },

    #[error("non-finite evaluation of {0}")]
    NonFinite(&'static str),

    #[error("chart degenerate: derivative has rank {rank}, expected {expected}")]
    ChartDegenerate { rank: usize, expected: usize },

    #[error("inconsistent charts: |P(H(w))| = {residual:e} exceeds tolerance")]
    InconsistentCharts { residual: f64 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    PreconditionViolation(String),

    #[error("degenerate: {0}")]
    Degenerate(String),

    #[error("point is off the manifold (|P(u)| = {distance:e})")]
    OffManifold { distance: f64 },

    #[error("iterates diverged at iteration {iteration}")]
    Divergence { iteration: usize },

    #[error("Newton projection failed to converge (residual {residual:e})")]
    NewtonFailure { residual: f64 },
}
