//! Gaussian-process regression of log completion time around a prior mean.
//!
//! The model regresses a zero-mean GP on the residuals `log t - log mu0(x)`,
//! so the posterior mean is `log mu0(x) + k*^T (K + noise I)^-1 r`.

mod hyper;
mod kernel;
pub(crate) mod model;
mod prior;
pub mod simplex;

pub use hyper::{optimize_hyperparameters, HyperBounds, Hyperparameters};
pub use kernel::KernelSpec;
pub use model::{GpModel, Posterior};
pub use prior::PriorMean;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum GpError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("completion time must be positive and finite, got {0}")]
    NonPositiveTime(f64),
    #[error("noise must be positive, got {0}")]
    InvalidNoise(f64),
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),
    #[error("Gram matrix is not positive definite even with noise {0}")]
    Factorization(f64),
    #[error("model has no training data")]
    Unfitted,
    #[error("hyperparameter bounds are empty: {0}")]
    EmptyBounds(String),
}
