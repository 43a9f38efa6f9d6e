use thiserror::Error;

/// Errors produced by the discretization, solver and post-processing layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("quadrature of degree {requested} is not available (maximum supported degree is {max})")]
    UnsupportedQuadrature { requested: usize, max: usize },

    #[error("point ({x}, {y}) does not lie on face {face}")]
    PointNotOnFace { face: usize, x: f64, y: f64 },

    #[error("{density}: {operation} is not available at this argument")]
    Unsupported {
        density: &'static str,
        operation: &'static str,
    },

    #[error("non-finite energy density value on cell {cell}")]
    NonFinite { cell: usize },

    #[error("non-zero normal trace {value:e} on Neumann face {face}")]
    NeumannTrace { face: usize, value: f64 },

    #[error("singular local matrix on cell {cell}: {what}")]
    Singular { cell: usize, what: &'static str },

    #[error("sparse factorization failed: {0}")]
    Factorization(String),

    #[error("energy evaluated to NaN at iteration {iteration}")]
    NanEnergy { iteration: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, Error>;
