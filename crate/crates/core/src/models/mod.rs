//! Regression models used as plug-in predictors, and the factories that
//! fit them.
//!
//! Everything a hypothesis test needs from a regression is captured by two
//! traits: [`Predictor`] (a fitted model that maps feature rows to
//! prediction vectors) and [`ModelFactory`] (a recipe that fits a predictor
//! to a feature/target pair). Tests receive factories, fit them on the
//! training split, and evaluate the resulting predictors on the test split;
//! they never see the concrete model type.
//!
//! Conditional models of X given Z, used for resampling and for
//! representation-based integration, live in [`conditional`].

use std::sync::Arc;

use crate::float::Float;
use crate::matrix::{DimensionMismatch, Matrix};

pub mod conditional;
mod krr;
mod lasso;
mod linear;
mod logistic;

pub use conditional::{
    rb_integrate, sample_conditional, ConditionalModel, IntegrationConfig, IntegrationMode,
};
pub use krr::{fit_krr_poly, KrrFactory, KrrModel};
pub use lasso::{fit_lasso, LassoFactory, LassoLambda};
pub use linear::{fit_minnorm, fit_ols, MinNormFactory, OlsFactory};
pub use logistic::{fit_logistic, LogisticFactory, LogisticModel};

/// Failure modes shared by every model fitter.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
    #[error("need at least {needed} rows to fit, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("{what} did not converge within {iterations} iterations")]
    NonConvergence { what: &'static str, iterations: usize },
    #[error("singular linear system while fitting {context}")]
    SingularSystem { context: &'static str },
    #[error("logistic targets contain only one class")]
    OneClassOnly,
    #[error("logistic target {value} is neither 0 nor 1")]
    InvalidLabel { value: f64 },
    #[error("{operation} is not supported for {kind} conditional models")]
    UnsupportedKind {
        operation: &'static str,
        kind: &'static str,
    },
}

/// A fitted regression model.
///
/// Implementations must be immutable: prediction never mutates the model,
/// so a fitted predictor can be shared freely across threads.
pub trait Predictor<F: Float>: Send + Sync {
    /// Length of the feature rows this model accepts.
    fn input_dim(&self) -> usize;

    /// Length of the prediction vector.
    fn output_dim(&self) -> usize;

    /// Writes the prediction for one feature row into `out`.
    ///
    /// `row` must have length [`input_dim`](Self::input_dim) and `out`
    /// length [`output_dim`](Self::output_dim).
    fn predict_into(&self, row: &[F], out: &mut [F]);

    /// A certified bound on the ℓ₁ norm of predictions, when the model
    /// class provides one (e.g. probabilities are bounded by 1).
    fn sup_bound(&self) -> Option<F> {
        None
    }

    /// Prediction for one feature row as a fresh vector.
    fn predict_row(&self, row: &[F]) -> Vec<F> {
        let mut out = vec![F::zero(); self.output_dim()];
        self.predict_into(row, &mut out);
        out
    }

    /// Scalar prediction; panics if `output_dim() != 1`.
    fn predict_scalar(&self, row: &[F]) -> F {
        assert_eq!(self.output_dim(), 1, "predict_scalar on vector model");
        let mut out = [F::zero()];
        self.predict_into(row, &mut out);
        out[0]
    }

    /// Row-wise predictions for a whole feature matrix.
    fn predict_matrix(&self, features: &Matrix<F>) -> Matrix<F> {
        let mut out = Matrix::zeros(features.rows(), self.output_dim());
        for i in 0..features.rows() {
            self.predict_into(features.row(i), out.row_mut(i));
        }
        out
    }

    /// Scalar predictions for a whole feature matrix; panics if
    /// `output_dim() != 1`.
    fn predict_column(&self, features: &Matrix<F>) -> Vec<F> {
        assert_eq!(self.output_dim(), 1, "predict_column on vector model");
        let mut out = [F::zero()];
        (0..features.rows())
            .map(|i| {
                self.predict_into(features.row(i), &mut out);
                out[0]
            })
            .collect()
    }
}

impl<F: Float, P: Predictor<F> + ?Sized> Predictor<F> for &P {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        (**self).predict_into(row, out)
    }

    fn sup_bound(&self) -> Option<F> {
        (**self).sup_bound()
    }
}

impl<F: Float, P: Predictor<F> + ?Sized> Predictor<F> for Box<P> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        (**self).predict_into(row, out)
    }

    fn sup_bound(&self) -> Option<F> {
        (**self).sup_bound()
    }
}

impl<F: Float, P: Predictor<F> + ?Sized> Predictor<F> for Arc<P> {
    fn input_dim(&self) -> usize {
        (**self).input_dim()
    }

    fn output_dim(&self) -> usize {
        (**self).output_dim()
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        (**self).predict_into(row, out)
    }

    fn sup_bound(&self) -> Option<F> {
        (**self).sup_bound()
    }
}

/// A fitted predictor behind a trait object, as returned by factories.
pub type BoxedPredictor<F> = Box<dyn Predictor<F>>;

/// A recipe for fitting a predictor to features and targets.
///
/// Hypothesis tests are parameterized by factories so that the same test
/// can run over ordinary least squares, LASSO, kernel ridge, or anything a
/// caller supplies. A factory must be deterministic: fitting the same data
/// twice yields predictors with identical outputs.
pub trait ModelFactory<F: Float>: Send + Sync {
    fn fit(&self, features: &Matrix<F>, targets: &Matrix<F>)
        -> Result<BoxedPredictor<F>, ModelError>;
}

impl<F, G> ModelFactory<F> for G
where
    F: Float,
    G: Fn(&Matrix<F>, &Matrix<F>) -> Result<BoxedPredictor<F>, ModelError> + Send + Sync,
{
    fn fit(
        &self,
        features: &Matrix<F>,
        targets: &Matrix<F>,
    ) -> Result<BoxedPredictor<F>, ModelError> {
        self(features, targets)
    }
}

/// A predictor defined by an arbitrary function, for oracle models whose
/// form is known in closed form rather than fitted.
#[derive(Clone)]
pub struct FnPredictor<F> {
    input_dim: usize,
    output_dim: usize,
    sup_bound: Option<F>,
    f: Arc<dyn Fn(&[F], &mut [F]) + Send + Sync>,
}

impl<F: Float> FnPredictor<F> {
    pub fn new(
        input_dim: usize,
        output_dim: usize,
        f: impl Fn(&[F], &mut [F]) + Send + Sync + 'static,
    ) -> Self {
        Self {
            input_dim,
            output_dim,
            sup_bound: None,
            f: Arc::new(f),
        }
    }

    /// A scalar-valued predictor from a plain function of the feature row.
    pub fn scalar(input_dim: usize, f: impl Fn(&[F]) -> F + Send + Sync + 'static) -> Self {
        Self::new(input_dim, 1, move |row, out| out[0] = f(row))
    }

    pub fn with_sup_bound(mut self, bound: F) -> Self {
        self.sup_bound = Some(bound);
        self
    }
}

impl<F: Float> Predictor<F> for FnPredictor<F> {
    fn input_dim(&self) -> usize {
        self.input_dim
    }

    fn output_dim(&self) -> usize {
        self.output_dim
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        debug_assert_eq!(row.len(), self.input_dim);
        debug_assert_eq!(out.len(), self.output_dim);
        (self.f)(row, out)
    }

    fn sup_bound(&self) -> Option<F> {
        self.sup_bound
    }
}

/// An affine map `x ↦ Wx + b`, the fitted form of every linear method.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel<F> {
    /// `output_dim × input_dim` coefficient matrix.
    weights: Matrix<F>,
    /// One intercept per output.
    intercept: Vec<F>,
}

impl<F: Float> LinearModel<F> {
    pub fn new(weights: Matrix<F>, intercept: Vec<F>) -> Self {
        assert_eq!(weights.rows(), intercept.len());
        Self { weights, intercept }
    }

    /// Coefficients as an `output_dim × input_dim` matrix.
    pub fn weights(&self) -> &Matrix<F> {
        &self.weights
    }

    /// Coefficient vector of a single-output model.
    pub fn coefficients(&self) -> &[F] {
        assert_eq!(self.weights.rows(), 1, "coefficients on multi-output model");
        self.weights.row(0)
    }

    pub fn intercept(&self) -> &[F] {
        &self.intercept
    }
}

impl<F: Float> Predictor<F> for LinearModel<F> {
    fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    fn output_dim(&self) -> usize {
        self.weights.rows()
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        debug_assert_eq!(row.len(), self.weights.cols());
        debug_assert_eq!(out.len(), self.weights.rows());
        for (k, slot) in out.iter_mut().enumerate() {
            let w = self.weights.row(k);
            let mut acc = self.intercept[k];
            for (wj, xj) in w.iter().zip(row) {
                acc += *wj * *xj;
            }
            *slot = acc;
        }
    }
}

/// Per-column affine rescaling to mean zero and unit variance, with the
/// inverse map needed to express coefficients on the original scale.
///
/// Columns with zero variance are left centered but unscaled so the
/// transform stays invertible.
pub(crate) struct Standardizer<F> {
    pub mean: Vec<F>,
    pub scale: Vec<F>,
}

impl<F: Float> Standardizer<F> {
    pub fn fit(features: &Matrix<F>) -> Self {
        let d = features.cols();
        let mut mean = Vec::with_capacity(d);
        let mut scale = Vec::with_capacity(d);
        for j in 0..d {
            mean.push(features.column_mean(j));
            let sd = features.column_std(j);
            scale.push(if sd > F::zero() { sd } else { F::one() });
        }
        Self { mean, scale }
    }

    pub fn transform(&self, features: &Matrix<F>) -> Matrix<F> {
        Matrix::from_fn(features.rows(), features.cols(), |i, j| {
            (features.get(i, j) - self.mean[j]) / self.scale[j]
        })
    }

    pub fn transform_row(&self, row: &[F], out: &mut Vec<F>) {
        out.clear();
        out.extend(
            row.iter()
                .enumerate()
                .map(|(j, &v)| (v - self.mean[j]) / self.scale[j]),
        );
    }
}

pub(crate) fn check_same_rows<F: Float>(
    features: &Matrix<F>,
    targets: &Matrix<F>,
) -> Result<(), ModelError> {
    if features.rows() != targets.rows() {
        return Err(DimensionMismatch {
            context: "feature and target row counts",
            expected: features.rows(),
            got: targets.rows(),
        }
        .into());
    }
    Ok(())
}
