//! Density surrogates for distributions of random functions.
//!
//! The crate works on curves sampled on a shared grid. A functional
//! principal component analysis turns each curve into standardized scores,
//! the scores get univariate kernel density estimates, and the average of
//! the log score densities over the first `r` components serves as a
//! log-density for curves at resolution `r`. Modal, mean and median curves
//! sit on top of the same machinery.
//!
//! The [`smallball`] module is a Monte Carlo laboratory that compares
//! small-ball probabilities `P(||X - x|| <= h)` with their closed-form
//! product approximations, and [`simulation`] provides the generative
//! models and the mode-estimation study harness used to validate the
//! estimators.
//!
//! The deterministic numerical core is generic over [`Scalar`] (`f32` or
//! `f64`); concrete aliases for both precisions are exported below.
//! Randomized components work in `f64`.

pub mod central;
pub mod curvespace;
mod error;
pub mod fpca;
pub mod rng;
pub mod scalar;
pub mod score_density;
mod search;
pub mod simulation;
pub mod smallball;
pub mod stats;
pub mod surrogate;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub use central::{CentralCurveSet, MedianCurve};
pub use curvespace::{Curve, FunctionalSample, Grid};
pub use fpca::{CovarianceMatrix, FpcaModel};
pub use score_density::{Kernel, ScoreDensityEstimator};
pub use surrogate::LogDensityValue;

pub type Grid64 = Grid<f64>;
pub type Grid32 = Grid<f32>;
pub type Curve64 = Curve<f64>;
pub type Curve32 = Curve<f32>;
pub type FunctionalSample64 = FunctionalSample<f64>;
pub type FunctionalSample32 = FunctionalSample<f32>;
pub type FpcaModel64 = FpcaModel<f64>;
pub type FpcaModel32 = FpcaModel<f32>;
pub type CovarianceMatrix64 = CovarianceMatrix<f64>;
pub type CovarianceMatrix32 = CovarianceMatrix<f32>;
pub type ScoreDensityEstimator64 = ScoreDensityEstimator<f64>;
pub type ScoreDensityEstimator32 = ScoreDensityEstimator<f32>;
pub type LogDensityValue64 = LogDensityValue<f64>;
pub type LogDensityValue32 = LogDensityValue<f32>;
