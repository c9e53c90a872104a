//! Residual-product test for conditional independence.

use crate::float::Float;
use crate::matrix::Dataset;
use crate::methods::{score_two_sided, MethodError};
use crate::models::ModelFactory;
use crate::stats::{Method, TestOutcome};

const DEGENERATE_HINT: &str = "the residual products are constant across the test rows; \
     interpolating regressions or constant columns usually cause this";

/// Tests conditional independence through the covariance of regression
/// residuals.
///
/// `factory_x` is fitted to predict X from Z and `factory_y` to predict Y
/// from Z on the training split.  Each test row is scored by the product
/// of its two residuals; under the null and with accurate regressions the
/// products average to zero, so the studentized mean is compared against
/// both normal tails.  The score is a product of two scalars, which is
/// why both X and Y must be univariate here.
pub fn gcm<F: Float>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    factory_x: &dyn ModelFactory<F>,
    factory_y: &dyn ModelFactory<F>,
) -> Result<TestOutcome<F>, MethodError> {
    for (what, got) in [("x", train.x().cols()), ("y", train.y().cols())] {
        if got != 1 {
            return Err(MethodError::UnsupportedDimension {
                method: Method::Gcm,
                what,
                got,
            });
        }
    }
    let fit_x = factory_x.fit(train.z(), train.x())?;
    let fit_y = factory_y.fit(train.z(), train.y())?;

    let pred_x = fit_x.predict_column(test.z());
    let pred_y = fit_y.predict_column(test.z());
    let scores: Vec<F> = (0..test.n_rows())
        .map(|i| (test.x().get(i, 0) - pred_x[i]) * (test.y().get(i, 0) - pred_y[i]))
        .collect();
    score_two_sided(Method::Gcm, &scores, DEGENERATE_HINT)
}
