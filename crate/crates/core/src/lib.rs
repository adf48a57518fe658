// Negated comparisons like `!(x > 0)` are load-bearing: they reject NaN,
// which would slip through the un-negated form.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

//! Box-constrained elastic net under measurement-matrix uncertainty.
//!
//! The crate has two halves that check each other:
//!
//! * a high-accuracy solver for the estimator itself ([`solver`]), built on
//!   the saturated soft-thresholding proximal map ([`kernels`]), together with
//!   random instance generation and empirical metrics ([`model`]);
//! * the deterministic asymptotic theory ([`theory`]): a scalar min-max
//!   saddle-point solve that predicts the mean squared error and the
//!   on/off-support recovery probabilities without running the estimator,
//!   plus regularizer tuning driven by those predictions ([`tuning`]).
//!
//! All numeric code is generic over the scalar type through [`num::Real`]
//! (`f32` or `f64`); the aliases below fix the common double-precision
//! instantiations.

pub mod error;
pub mod kernels;
pub mod linalg;
pub mod model;
pub mod num;
pub mod solver;
pub mod theory;
pub mod tuning;

pub use error::{Error, Result};
pub use num::Real;

/// Double-precision problem configuration.
pub type Config64 = model::ProblemConfig<f64>;
/// Double-precision signal prior.
pub type Prior64 = model::Prior<f64>;
/// Double-precision saddle point.
pub type Saddle64 = theory::SaddlePoint<f64>;
/// Double-precision theory prediction.
pub type Prediction64 = theory::TheoryPrediction<f64>;
/// Double-precision solver report.
pub type Report64 = solver::SolveReport<f64>;
