//! Resampling calibration of the loss-comparison statistic.

use crate::float::Float;
use crate::loss::LossFunction;
use crate::matrix::{Dataset, DimensionMismatch};
use crate::methods::{row_losses, score_one_sided, MethodError};
use crate::models::{ConditionalModel, ModelFactory};
use crate::rng::RngStream;
use crate::stats::{permutation_pvalue, Method, TestOutcome};

const DEGENERATE_HINT: &str = "a loss-comparison statistic is constant and cannot be ranked \
     against its resamples; the stfr test with rho > 0 avoids the tie";

/// Tests conditional independence by recomputing the loss-comparison
/// statistic under draws of X from a conditional model given Z.
///
/// The observed statistic is the studentized mean of
/// `loss(fit without x) - loss(fit with x)` on the test split, exactly as
/// in [`crate::methods::stfr`] with no noise.  Both fits are trained
/// once; for each of the `n_resamples` rounds every test row's X block is
/// redrawn from `q` at that row's Z, only the x-aware losses are
/// recomputed, and the statistic is reassembled.  The p-value is the
/// add-one rank of the observed statistic among its resamples, so its
/// validity rests on `q` matching the true conditional law of X given Z
/// rather than on any property of the fits.
pub fn crt<F: Float>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    factory: &dyn ModelFactory<F>,
    q: &ConditionalModel<F>,
    loss: LossFunction,
    n_resamples: usize,
    stream: RngStream,
) -> Result<TestOutcome<F>, MethodError> {
    assert!(n_resamples > 0, "need at least one resample");
    let d_x = test.x().cols();
    if q.dim_x() != d_x {
        return Err(MethodError::Model(
            DimensionMismatch {
                context: "resampling model x width",
                expected: d_x,
                got: q.dim_x(),
            }
            .into(),
        ));
    }
    let with_x = factory.fit(&train.xz(), train.y())?;
    let without_x = factory.fit(&train.xz_with_x_zeroed(), train.y())?;

    let full = row_losses(loss, &with_x.predict_matrix(&test.xz()), test.y());
    let blind = row_losses(
        loss,
        &without_x.predict_matrix(&test.xz_with_x_zeroed()),
        test.y(),
    );
    let observed_scores: Vec<F> = blind.iter().zip(&full).map(|(&b, &f)| b - f).collect();
    let observed = score_one_sided(Method::Crt, &observed_scores, DEGENERATE_HINT)?;

    let n = test.n_rows();
    let d_z = test.z().cols();
    let mut rng = stream.rng();
    let mut feature_row = vec![F::zero(); d_x + d_z];
    let mut scores = vec![F::zero(); n];
    let mut resampled = Vec::with_capacity(n_resamples);
    for _ in 0..n_resamples {
        for i in 0..n {
            let z_row = test.z().row(i);
            let draw = q.sample_with(z_row, &mut rng);
            feature_row[..d_x].copy_from_slice(&draw);
            feature_row[d_x..].copy_from_slice(z_row);
            let refit_loss =
                loss.evaluate_vec(&with_x.predict_row(&feature_row), test.y().row(i));
            scores[i] = blind[i] - refit_loss;
        }
        resampled.push(score_one_sided(Method::Crt, &scores, DEGENERATE_HINT)?.statistic);
    }

    Ok(TestOutcome {
        p_value: permutation_pvalue(observed.statistic, &resampled),
        ..observed
    })
}
