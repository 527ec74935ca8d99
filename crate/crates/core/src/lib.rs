//! Robust Kronecker PCA covariance estimation.
//!
//! A spatio-temporal covariance over `p_t` frames of `p_s` variables is fitted
//! as a low separation-rank sum of Kronecker products plus a sparse correction.
//! Both parts are estimated jointly by proximal gradient on the
//! Pitsianis–Van Loan rearrangement of the sample covariance, with an optional
//! block-Toeplitz (temporally stationary) variant.
//!
//! Module map:
//!
//! * [`rearrange`]: dimensions, covariance containers, the rearrangement operator.
//! * [`shrinkage`]: SVD, singular value and entrywise soft thresholding.
//! * [`toeplitz`]: diagonal index sets and the row-orthonormal projector `P`.
//! * [`solver`]: the two proximal-gradient estimators and their diagnostics.
//! * [`synth`]: AR Kronecker-sum ground truths, corruption, Gaussian sampling.
//! * [`eval`]: MSE, prediction loss, benchmarks and diagnostics.
//! * [`io`]: CSV/JSON persistence.

// Negated float comparisons are used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod eval;
pub mod io;
pub mod rearrange;
pub mod shrinkage;
pub mod solver;
pub mod synth;
pub mod toeplitz;

pub use error::{Error, Result};
pub use rearrange::{inverse_rearrange, kron, rearrange, Dims, RearrangedMatrix, StCovariance};
pub use solver::{
    kron_spectrum, solve_robust_kronpca, solve_toeplitz, KronSpectrum, RegParams, RobustKronEstimate, SolverConfig,
};
pub use synth::SampleSet;

/// Dense real matrix used throughout the crate (column-major storage).
pub type Matrix = nalgebra::DMatrix<f64>;
