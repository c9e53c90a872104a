//! Loss comparison between a fit that sees X and one that does not.

use crate::float::Float;
use crate::loss::LossFunction;
use crate::matrix::Dataset;
use crate::methods::{row_losses, score_one_sided, MethodError};
use crate::models::ModelFactory;
use crate::rng::RngStream;
use crate::stats::{Method, TestOutcome};

const DEGENERATE_HINT: &str = "the fits with and without x score every test row identically; \
     rerun with a noise level rho > 0 to break the ties";

/// Knobs for [`stfr`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StfrConfig<F> {
    /// Standard deviation of the independent Gaussian noise added to each
    /// score.  Zero adds nothing; a small positive value keeps the test
    /// usable when the two fits collapse onto the same predictions.
    pub rho: F,
    /// Nominal level carried alongside results for reporting; the test
    /// itself always returns the full p-value.
    pub alpha: F,
}

impl<F: Float> Default for StfrConfig<F> {
    fn default() -> Self {
        StfrConfig {
            rho: F::zero(),
            alpha: F::cast(0.05),
        }
    }
}

/// Tests conditional independence by asking whether seeing X lowers the
/// held-out loss of predicting Y.
///
/// One factory is fitted twice on the training split: once on `[X | Z]`
/// and once on the same features with the X block zeroed out.  Each test
/// row is scored by `loss(fit without x) - loss(fit with x)`, plus
/// `N(0, rho^2)` noise when `config.rho > 0`, and the studentized score
/// mean is compared against the upper normal tail: under the null the
/// x-blind fit should do no worse.
pub fn stfr<F: Float>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    factory: &dyn ModelFactory<F>,
    loss: LossFunction,
    config: &StfrConfig<F>,
    stream: RngStream,
) -> Result<TestOutcome<F>, MethodError> {
    assert!(config.rho >= F::zero(), "noise level must be nonnegative");
    let with_x = factory.fit(&train.xz(), train.y())?;
    let without_x = factory.fit(&train.xz_with_x_zeroed(), train.y())?;

    let full = row_losses(loss, &with_x.predict_matrix(&test.xz()), test.y());
    let blind = row_losses(
        loss,
        &without_x.predict_matrix(&test.xz_with_x_zeroed()),
        test.y(),
    );

    let mut rng = stream.rng();
    let scores: Vec<F> = blind
        .iter()
        .zip(&full)
        .map(|(&b, &f)| {
            let mut t = b - f;
            if config.rho > F::zero() {
                t += config.rho * F::standard_normal(&mut rng);
            }
            t
        })
        .collect();
    score_one_sided(Method::Stfr, &scores, DEGENERATE_HINT)
}
