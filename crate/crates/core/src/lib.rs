//! Regression-based conditional independence testing.
//!
//! Given samples of (X, Y, Z), the `methods` module provides six tests of
//! the null hypothesis X ⊥ Y | Z that plug in user-chosen regression
//! models; `models` supplies those regressors, `simgen` the synthetic data
//! generators used to study them, and `theory` Monte Carlo estimators of
//! the population quantities that predict each test's behavior under
//! model misspecification.
//!
//! Everything is generic over the scalar type (see [`float::Float`]);
//! the `*64` aliases below are the concrete types most code wants.

pub mod float;
pub mod linalg;
pub mod loss;
pub mod matrix;
pub mod methods;
pub mod models;
pub mod rng;
pub mod simgen;
pub mod stats;
pub mod theory;

pub use float::Float;
pub use loss::LossFunction;
pub use matrix::{Dataset, DimensionMismatch, Matrix};
pub use methods::{crt, gcm, rbpt, rbpt2, resit, stfr, MethodError, StfrConfig};
pub use models::{BoxedPredictor, ConditionalModel, ModelError, ModelFactory, Predictor};
pub use rng::{RngStream, StreamRng};
pub use stats::{Method, TestOutcome};
pub use theory::{GapEstimate, GapKind, OraclePredictors, Tails, TheoryError};

pub type Matrix64 = Matrix<f64>;
pub type Dataset64 = Dataset<f64>;
pub type TestOutcome64 = TestOutcome<f64>;
