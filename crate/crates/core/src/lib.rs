//! Rational kriging: a kriging predictor of rational form whose GLS mean
//! estimate is always a convex combination of the observations.
//!
//! Alongside the rational model the crate provides ordinary and limit
//! kriging, inverse distance weighting, universal kriging with a rational
//! variant, discrepancy-model (KOH) calibration for simulators linear in their
//! parameters, the test functions used to benchmark them, and the usual
//! accuracy metrics.

pub mod calibration;
pub mod error;
pub mod kernels;
pub mod krige;
pub mod linalg;
pub mod metrics;
pub mod optimize;
pub mod testfns;
pub mod universal;

pub use error::{Error, Result};
pub use kernels::{DataSet, KernelFamily, KernelSpec};
pub use krige::{FitOptions, FittedOK, FittedRK, Prediction};
pub use universal::{FittedUK, RegressionBasis, UkVariant};
