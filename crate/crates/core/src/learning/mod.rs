//! Kernels, support vector regression, multiple-kernel learning and linear
//! regression.

pub mod kernel;
pub mod linreg;
pub mod mkl;
pub mod svr;

use thiserror::Error;

pub use kernel::{gram_matrix, kernel_eval, Kernel, WeightedKernel};
pub use linreg::{linreg_fit, LinearModel};
pub use mkl::{mkl_train, mkl_with_weights, MklModel};
pub use svr::{svr_predict, svr_train, SvrModel, SvrParams};

#[derive(Debug, Error)]
pub enum LearningError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("model format: {0}")]
    Format(String),
}
