//! Numerical laboratory for fractional Brownian motion with `H > 1/2`.
//!
//! * [`gaussian`]: covariance kernels, exact sampling, path statistics.
//! * [`frac`]: Riemann-Liouville derivatives, the extended fractional
//!   integral and its Young-sum and mollifier oracles.
//! * [`deviation`]: increment autocovariance, squared-covariance sums,
//!   Gaussian small-deviation bounds and Monte Carlo estimates.
//! * [`representation`]: the adapted step integrand whose integral
//!   reproduces a prescribed terminal value.
//! * [`harness`]: configuration, experiment dispatch and reports.

// `!(x > 0.0)` also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deviation;
pub mod error;
pub mod frac;
pub mod gaussian;
pub mod grid;
pub mod harness;
pub mod representation;

pub use error::{Error, Result};
pub use gaussian::HurstParam;
pub use grid::{GridPoint, TimeGrid};
