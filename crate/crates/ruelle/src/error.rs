use thiserror::Error;

/// Errors produced by the workbench.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("functions live on different symbol spaces")]
    SpaceMismatch,

    #[error("depth {requested} needs {values} tabulated values, above the supported maximum {max}")]
    DepthOverflow {
        requested: usize,
        values: u128,
        max: usize,
    },

    #[error("potential is not normalized: ||L1 - 1||_inf = {0:.3e}")]
    NotNormalized(f64),

    #[error("power iteration did not converge: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { residual: f64, iterations: usize },

    #[error("Neumann series did not converge within {terms} terms (last increment {increment:.3e})")]
    SeriesDivergence { terms: usize, increment: f64 },

    #[error("observable must have mean zero: integral against mu is {0:.3e}")]
    NonZeroMean(f64),

    #[error("direction is not in the kernel of the transfer operator: ||L eta||_inf = {0:.3e}")]
    NotInKernel(f64),

    #[error("potential is coboundary to a constant: entropy has no ascent direction")]
    NoAscentDirection,

    #[error("depth-2 kernel is degenerate (expected dimension 2)")]
    DegenerateKernel,

    #[error("internal consistency check failed: {0}")]
    ConsistencyCheck(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
