use thiserror::Error;

use crate::expr::ExprError;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("field has {found} values, expected {expected}")]
    FieldLength { expected: usize, found: usize },
    #[error("node {0} is a boundary node")]
    BoundaryNode(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("{context}: {source}")]
    Eval {
        context: String,
        #[source]
        source: ExprError,
    },
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("singular step matrix at time level {level} (pivot row {row})")]
    Singular { level: usize, row: usize },
    #[error("compatibility residual {max_abs:.3e} exceeds tolerance {tol:.3e} at t = {time}")]
    Compatibility { time: f64, max_abs: f64, tol: f64 },
    #[error("Picard iteration did not converge within {iterations} iterations (last distance {distance:.3e})")]
    NotConverged { iterations: usize, distance: f64 },
    #[error("window starting at t = {t_start} shrank below one time step")]
    WindowTooSmall { t_start: f64 },
    #[error("degenerate data: {0}")]
    Degenerate(String),
}

impl Error {
    pub(crate) fn eval(context: impl Into<String>, source: ExprError) -> Self {
        Error::Eval {
            context: context.into(),
            source,
        }
    }
}
