use alloc::string::String;
use alloc::vec::Vec;

use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("Hilbert space dimension {dim} exceeds the configured cap {cap}")]
    DimensionOverflow { dim: usize, cap: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dressed-state assignment is not injective for label {label}")]
    DegenerateAssignment {
        label: String,
        /// Row-major `labels × eigenvectors` overlap matrix |<bare|eig>|².
        overlaps: Vec<Vec<f64>>,
    },
    #[error("missing dressed-state assignment for label {0}")]
    MissingAssignment(String),
    #[error("propagation produced a non-finite state")]
    NonFinite,
    #[error("propagator did not converge to the step tolerance within order {max_order}")]
    Convergence { max_order: usize },
    #[error("projected gate is rank deficient (smallest singular value {0:e})")]
    DegenerateProjection(f64),
    #[error("matrix is not unitary within tolerance (deviation {0:e})")]
    NotUnitary(f64),
    #[error("optimizer did not converge: {0}")]
    NoConvergence(String),
    #[error("Krotov iteration {iteration} failed to decrease the functional after {retries} step-size increases")]
    NonMonotonic { iteration: usize, retries: usize },
}
