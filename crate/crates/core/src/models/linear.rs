//! Least-squares linear models: ordinary and minimum-norm.

use crate::float::Float;
use crate::linalg::{minnorm_solve, LinalgError};
use crate::matrix::Matrix;

use super::{check_same_rows, BoxedPredictor, LinearModel, ModelError, ModelFactory};

/// Relative singular-value cutoff below which directions are treated as
/// null space.
const RANK_CUTOFF: f64 = 1e-10;

fn map_linalg(err: LinalgError) -> ModelError {
    match err {
        LinalgError::NotPositiveDefinite { .. } => ModelError::SingularSystem {
            context: "least-squares normal equations",
        },
        LinalgError::EigenNonConvergence { .. } => ModelError::NonConvergence {
            what: "least-squares eigenvalue iteration",
            iterations: 60,
        },
    }
}

/// Fits a least-squares linear model, optionally with an intercept.
///
/// On rank-deficient systems this degrades gracefully to the minimum-norm
/// solution rather than failing, so callers can fit underdetermined
/// problems without switching entry points.
pub fn fit_ols<F: Float>(
    features: &Matrix<F>,
    targets: &Matrix<F>,
    intercept: bool,
) -> Result<LinearModel<F>, ModelError> {
    check_same_rows(features, targets)?;
    if features.rows() == 0 {
        return Err(ModelError::InsufficientData { needed: 1, got: 0 });
    }
    if !intercept {
        return fit_minnorm(features, targets);
    }
    let n = features.rows();
    let ones = Matrix::from_fn(n, 1, |_, _| F::one());
    let augmented = Matrix::hstack(&[features, &ones]).expect("row counts match");
    let coef = minnorm_solve(&augmented, targets, F::cast(RANK_CUTOFF)).map_err(map_linalg)?;
    let d = features.cols();
    let k = targets.cols();
    let weights = Matrix::from_fn(k, d, |out, j| coef.get(j, out));
    let intercepts = (0..k).map(|out| coef.get(d, out)).collect();
    Ok(LinearModel::new(weights, intercepts))
}

/// Fits the minimum-Euclidean-norm least-squares solution, with no
/// intercept term.
///
/// Well-posed on any shape, including wide systems with more columns than
/// rows, where it picks the unique least-squares solution of smallest
/// coefficient norm.
pub fn fit_minnorm<F: Float>(
    features: &Matrix<F>,
    targets: &Matrix<F>,
) -> Result<LinearModel<F>, ModelError> {
    check_same_rows(features, targets)?;
    if features.rows() == 0 {
        return Err(ModelError::InsufficientData { needed: 1, got: 0 });
    }
    let coef = minnorm_solve(features, targets, F::cast(RANK_CUTOFF)).map_err(map_linalg)?;
    let d = features.cols();
    let k = targets.cols();
    let weights = Matrix::from_fn(k, d, |out, j| coef.get(j, out));
    Ok(LinearModel::new(weights, vec![F::zero(); k]))
}

/// Factory for [`fit_ols`].
#[derive(Debug, Clone, Copy)]
pub struct OlsFactory {
    pub intercept: bool,
}

impl Default for OlsFactory {
    fn default() -> Self {
        Self { intercept: true }
    }
}

impl<F: Float> ModelFactory<F> for OlsFactory {
    fn fit(
        &self,
        features: &Matrix<F>,
        targets: &Matrix<F>,
    ) -> Result<BoxedPredictor<F>, ModelError> {
        Ok(Box::new(fit_ols(features, targets, self.intercept)?))
    }
}

/// Factory for [`fit_minnorm`].
#[derive(Debug, Clone, Copy, Default)]
pub struct MinNormFactory;

impl<F: Float> ModelFactory<F> for MinNormFactory {
    fn fit(
        &self,
        features: &Matrix<F>,
        targets: &Matrix<F>,
    ) -> Result<BoxedPredictor<F>, ModelError> {
        Ok(Box::new(fit_minnorm(features, targets)?))
    }
}
