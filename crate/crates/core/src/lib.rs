//! Generalized CP tensor decomposition.
//!
//! Fits a low-rank Kruskal model `M = [[λ; A₁, …, A_d]]` to a data tensor by
//! minimizing a sum of elementwise losses chosen to match the data
//! distribution (Gaussian, Bernoulli, Poisson, Gamma, …), subject to
//! optional nonnegativity and L2 regularization.
//!
//! The crate is `no_std` with `alloc`. All indices and modes are 0-based.

#![cfg_attr(not(test), no_std)]
// `!(a >= b)` is used on purpose so that NaN falls into the rejecting branch.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

mod error;
pub mod fit;
pub mod kernel;
pub mod kruskal;
pub mod loss;
mod math;
pub mod optim;
pub mod tensor;

pub use error::{Error, Result};
pub use fit::{best_run, default_init, fit_gcp, fit_multistart, FitResult, Init};
pub use kernel::{
    deriv_tensor, gaussian_fast_fg, gcp_fg, gcp_fg_weighted_lambda, gram_hadamard, lambda_gradient,
    model_entries_at, mttkrp, mttkrp_coo, mttkrp_dense, Data, DerivTensor, FitProblem, Weighting,
};
pub use kruskal::KruskalTensor;
pub use loss::{LossKind, LossSpec};
pub use optim::{minimize, Bounds, IterRecord, OptOptions, OptTrace, Status};
pub use tensor::{hadamard, khatri_rao, CooTensor, DenseTensor, Matrix, Shape, DENSE_ENTRY_BUDGET};
