//! Hypothesis tests of conditional independence.
//!
//! Every test here targets the null hypothesis that X carries no
//! information about Y once Z is known.  Each one regresses out Z with
//! user-supplied model factories on a training split, reduces the held-out
//! split to per-row scores, and turns those scores into a statistic and a
//! p-value:
//!
//! * [`stfr`] compares the held-out loss of a fit that sees X against the
//!   same fit with X blanked out, with optional tie-breaking noise.
//! * [`gcm`] correlates the two regression residuals.
//! * [`resit`] rank-correlates the residuals and calibrates by permutation.
//! * [`rbpt`] compares the fit against its own average over a model of
//!   X given Z, removing the need to regress Y on Z alone.
//! * [`rbpt2`] replaces that average with a second regression fitted to
//!   the first one's predictions.
//! * [`crt`] recomputes the loss-comparison statistic under draws from a
//!   model of X given Z and reads off a resampling p-value.
//!
//! The score-to-outcome reductions are exposed as [`score_one_sided`] and
//! [`score_two_sided`] so that callers can audit or rebuild any outcome
//! from raw scores.

use crate::float::Float;
use crate::loss::LossFunction;
use crate::matrix::Matrix;
use crate::models::ModelError;
use crate::stats::{
    mean_and_sigma_hat, one_sided_pvalue, two_sided_pvalue, Method, StatError, TestOutcome,
};

mod crt;
mod gcm;
mod resit;
mod rbpt;
mod stfr;

pub use crt::crt;
pub use gcm::gcm;
pub use resit::resit;
pub use rbpt::{rbpt, rbpt2};
pub use stfr::{stfr, StfrConfig};

/// Scores whose estimated spread falls at or below this floor cannot be
/// studentized; the affected test reports a degenerate variance instead of
/// dividing by it.
pub const SIGMA_FLOOR: f64 = 1e-12;

/// Failure modes shared by the hypothesis tests.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MethodError {
    /// The per-row scores were (numerically) constant, so the studentized
    /// statistic does not exist.  The hint names a workaround.
    #[error("score variance collapsed (sigma_hat = {sigma_hat:.3e}); {hint}")]
    DegenerateVariance { sigma_hat: f64, hint: &'static str },
    /// The test only supports a particular variable width.
    #[error("{method} requires univariate {what}, got width {got}")]
    UnsupportedDimension {
        method: Method,
        what: &'static str,
        got: usize,
    },
    /// Loss-comparison tests rely on convexity of the loss; refusing a
    /// non-convex one is cheaper than reporting a meaningless p-value.
    #[error("loss-comparison tests require a convex loss")]
    NonConvexLoss,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Stat(#[from] StatError),
}

/// Studentizes scores whose mean is nonpositive under the null and
/// compares against the upper normal tail:
/// `statistic = sqrt(n) * mean / sigma_hat`, `p = 1 - Phi(statistic)`.
pub fn score_one_sided<F: Float>(
    method: Method,
    scores: &[F],
    degenerate_hint: &'static str,
) -> Result<TestOutcome<F>, MethodError> {
    let (t_bar, sigma_hat) = mean_and_sigma_hat(scores)?;
    guard_sigma(sigma_hat, degenerate_hint)?;
    let statistic = F::cast(scores.len()).sqrt() * t_bar / sigma_hat;
    Ok(TestOutcome {
        method,
        statistic,
        p_value: one_sided_pvalue(statistic),
        t_bar,
        sigma_hat,
        n_test: scores.len(),
    })
}

/// Studentizes scores whose mean is zero under the null and compares
/// against both normal tails: `statistic = |sqrt(n) * mean / sigma_hat|`,
/// `p = 2 (1 - Phi(statistic))`.
pub fn score_two_sided<F: Float>(
    method: Method,
    scores: &[F],
    degenerate_hint: &'static str,
) -> Result<TestOutcome<F>, MethodError> {
    let (t_bar, sigma_hat) = mean_and_sigma_hat(scores)?;
    guard_sigma(sigma_hat, degenerate_hint)?;
    let statistic = (F::cast(scores.len()).sqrt() * t_bar / sigma_hat).abs();
    Ok(TestOutcome {
        method,
        statistic,
        p_value: two_sided_pvalue(statistic),
        t_bar,
        sigma_hat,
        n_test: scores.len(),
    })
}

fn guard_sigma<F: Float>(sigma_hat: F, hint: &'static str) -> Result<(), MethodError> {
    if !(sigma_hat.to_f64() > SIGMA_FLOOR) {
        return Err(MethodError::DegenerateVariance {
            sigma_hat: sigma_hat.to_f64(),
            hint,
        });
    }
    Ok(())
}

/// Per-row losses of a prediction matrix against targets of equal shape.
pub(crate) fn row_losses<F: Float>(
    loss: LossFunction,
    predictions: &Matrix<F>,
    targets: &Matrix<F>,
) -> Vec<F> {
    assert_eq!(predictions.rows(), targets.rows(), "row count mismatch");
    (0..targets.rows())
        .map(|i| loss.evaluate_vec(predictions.row(i), targets.row(i)))
        .collect()
}
