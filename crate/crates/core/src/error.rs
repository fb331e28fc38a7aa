use thiserror::Error;

/// Errors produced by the numerical toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("non-finite sample at index {0}")]
    NonFinite(usize),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("malformed header: {0}")]
    Header(String),
    #[error("truncated payload: header declares {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("unknown potential label `{0}`")]
    UnknownPotential(String),
    #[error("finite-difference step underflow at derivative order {0}")]
    StepUnderflow(u32),
    #[error("classical flow left the finite range at t = {0}")]
    FlowBlowup(f64),
    #[error("under-resolved: {0}")]
    Underresolved(String),
    #[error("lens transform requested at t = {0}, where |cos t| < 0.1")]
    LensSingular(f64),
    #[error("solution is identically zero")]
    ZeroSolution,
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
