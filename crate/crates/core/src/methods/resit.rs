//! Rank-correlation test on regression residuals with permutation
//! calibration.

use crate::float::Float;
use crate::matrix::Dataset;
use crate::methods::MethodError;
use crate::models::ModelFactory;
use crate::rng::{random_permutation, RngStream};
use crate::stats::{permutation_pvalue, spearman_rho, Method, StatError, TestOutcome};

/// Tests conditional independence by rank-correlating the residuals of X
/// and Y regressed on Z.
///
/// The statistic is the absolute Spearman correlation of the two held-out
/// residual vectors.  Its null distribution is approximated by
/// `n_permutations` random reshufflings of the Y residuals against the X
/// residuals, and the returned p-value is the usual add-one permutation
/// quantile, so it can never drop below `1 / (n_permutations + 1)`.
pub fn resit<F: Float>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    factory_x: &dyn ModelFactory<F>,
    factory_y: &dyn ModelFactory<F>,
    n_permutations: usize,
    stream: RngStream,
) -> Result<TestOutcome<F>, MethodError> {
    assert!(n_permutations > 0, "need at least one permutation");
    for (what, got) in [("x", train.x().cols()), ("y", train.y().cols())] {
        if got != 1 {
            return Err(MethodError::UnsupportedDimension {
                method: Method::Resit,
                what,
                got,
            });
        }
    }
    let n = test.n_rows();
    if n < 3 {
        return Err(StatError::InsufficientData { needed: 3, got: n }.into());
    }
    let fit_x = factory_x.fit(train.z(), train.x())?;
    let fit_y = factory_y.fit(train.z(), train.y())?;

    let pred_x = fit_x.predict_column(test.z());
    let pred_y = fit_y.predict_column(test.z());
    let eps: Vec<F> = (0..n).map(|i| test.x().get(i, 0) - pred_x[i]).collect();
    let eta: Vec<F> = (0..n).map(|i| test.y().get(i, 0) - pred_y[i]).collect();

    let observed = spearman_rho(&eps, &eta)?.abs();
    let mut rng = stream.rng();
    let mut shuffled = vec![F::zero(); n];
    let mut resamples = Vec::with_capacity(n_permutations);
    for _ in 0..n_permutations {
        let perm = random_permutation(n, &mut rng);
        for (slot, &src) in shuffled.iter_mut().zip(&perm) {
            *slot = eta[src];
        }
        resamples.push(spearman_rho(&eps, &shuffled)?.abs());
    }

    Ok(TestOutcome {
        method: Method::Resit,
        statistic: observed,
        p_value: permutation_pvalue(observed, &resamples),
        t_bar: F::zero(),
        sigma_hat: F::zero(),
        n_test: n,
    })
}
