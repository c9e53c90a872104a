//! Monte Carlo estimators for the population gaps that govern each test's
//! asymptotic behaviour, plus the closed-form Gaussian divergences and
//! rejection-rate forecast they plug into.
//!
//! The estimators run against an [`OraclePredictors`] bundle: a declared
//! data distribution together with its known limiting and
//! unrestricted-optimal predictors.  Every gap is reported as a plain
//! sample mean over fresh draws with its standard error, so downstream
//! checks can phrase claims as "within three standard errors" and know
//! exactly how much false-alarm probability they are buying.

use serde::{Deserialize, Serialize};

use crate::float::Float;
use crate::loss::LossFunction;
use crate::matrix::Dataset;
use crate::methods::row_losses;
use crate::models::{
    rb_integrate, BoxedPredictor, ConditionalModel, IntegrationConfig, ModelError, Predictor,
};
use crate::rng::RngStream;
use crate::stats::{mean_and_sigma_hat, std_normal_cdf, std_normal_quantile};

/// Smallest draw count the gap estimators accept; below this the reported
/// standard errors are too noisy to support a three-standard-error
/// reading.
pub const MIN_GAP_DRAWS: usize = 100;

/// Errors from the gap estimators and divergence helpers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TheoryError {
    /// A scalar argument fell outside its domain.
    #[error("{what} is out of domain: {value}")]
    DomainError { what: &'static str, value: f64 },
    /// The requested analysis is only meaningful for convex losses.
    #[error("a convex loss is required")]
    NonConvexLoss,
    /// Prediction or integration failed underneath the estimator.
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Which population quantity a [`GapEstimate`] measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GapKind {
    /// Risk of the x-blind limiting fit minus risk of the full limiting
    /// fit; the drift of the loss-comparison statistic.
    OmegaStfr,
    /// Expected product of the two regression residuals; the drift of the
    /// residual-product statistic.
    OmegaGcm,
    /// Risk of predictions averaged over a surrogate conditional minus
    /// risk of predictions averaged over the exact conditional.
    OmegaRbpt1,
    /// Jensen penalty: risk of the plug-in prediction minus risk of its
    /// conditional average.
    OmegaRbpt2Jensen,
    /// Excess risk of the full limiting fit over the best unrestricted
    /// predictor with the same inputs.
    Delta1,
    /// Excess risk of the x-blind limiting fit over the best unrestricted
    /// x-blind predictor.
    Delta2,
    /// Risk of the best x-blind predictor minus risk of the best
    /// unrestricted predictor; what dropping x costs an oracle.
    DeltaBayes,
    /// Pointwise drift between the limiting and optimal regressions of X
    /// on Z, measured by the loss.
    DeltaSmall1,
    /// Pointwise drift between the limiting and optimal regressions of Y
    /// on Z, measured by the loss.
    DeltaSmall2,
}

impl GapKind {
    /// Stable identifier used in reports and serialized output.
    pub fn name(self) -> &'static str {
        match self {
            GapKind::OmegaStfr => "omega_stfr",
            GapKind::OmegaGcm => "omega_gcm",
            GapKind::OmegaRbpt1 => "omega_rbpt1",
            GapKind::OmegaRbpt2Jensen => "omega_rbpt2_jensen",
            GapKind::Delta1 => "delta1",
            GapKind::Delta2 => "delta2",
            GapKind::DeltaBayes => "delta_bayes",
            GapKind::DeltaSmall1 => "delta_small1",
            GapKind::DeltaSmall2 => "delta_small2",
        }
    }
}

impl std::fmt::Display for GapKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A Monte Carlo estimate of one population gap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapEstimate<F> {
    /// Sample mean of the per-draw scores.
    pub value: F,
    /// Standard deviation of the scores divided by the square root of the
    /// draw count; zero when the scores are exactly constant.
    pub std_error: F,
    /// Number of fresh draws behind the estimate.
    pub n_draws: usize,
    /// The quantity being estimated.
    pub gap_kind: GapKind,
}

/// A declared data distribution with its known optimal predictors.
///
/// Role conventions.  For loss-comparison analyses, `g1_star` and
/// `f1_star` read feature rows laid out `[x | z]` while `g2_star` and
/// `f2_star` read plain `z` rows, mirroring how the stfr test arranges its
/// two fits.  For residual-product analyses all four read plain `z` rows:
/// slot 1 regresses X on Z and slot 2 regresses Y on Z, with the `g*`
/// members holding the limiting fits and the `f*` members the true
/// conditional means.
pub struct OraclePredictors<F: Float> {
    /// Limiting fit with access to x (residual convention: limiting
    /// regression of X on Z).
    pub g1_star: BoxedPredictor<F>,
    /// Limiting fit blind to x (residual convention: limiting regression
    /// of Y on Z).
    pub g2_star: BoxedPredictor<F>,
    /// Unrestricted-optimal counterpart of `g1_star`.
    pub f1_star: BoxedPredictor<F>,
    /// Unrestricted-optimal counterpart of `g2_star`.
    pub f2_star: BoxedPredictor<F>,
    /// Draws i.i.d. datasets from the declared distribution.
    pub sampler: Box<dyn Fn(RngStream, usize) -> Dataset<F> + Send + Sync>,
    /// The exact conditional law of X given Z.
    pub x_given_z: ConditionalModel<F>,
}

impl<F: Float> OraclePredictors<F> {
    /// Draws `n` fresh rows from the declared distribution.
    pub fn sample(&self, stream: RngStream, n: usize) -> Dataset<F> {
        (self.sampler)(stream, n)
    }
}

fn assert_draws(n_draws: usize) {
    assert!(
        n_draws >= MIN_GAP_DRAWS,
        "gap estimation needs at least {MIN_GAP_DRAWS} draws, got {n_draws}"
    );
}

fn summarize<F: Float>(scores: &[F], gap_kind: GapKind) -> GapEstimate<F> {
    let n_draws = scores.len();
    let (value, sigma) =
        mean_and_sigma_hat(scores).expect("oracle draws produced non-finite scores");
    GapEstimate {
        value,
        std_error: sigma / F::cast(n_draws).sqrt(),
        n_draws,
        gap_kind,
    }
}

/// Estimates the limiting risk gap ℓ(g₂*(Z), Y) − ℓ(g₁*(X, Z), Y) that the
/// loss-comparison statistic concentrates around.
///
/// Positive values mean the x-blind fit pays a real price for ignoring x,
/// so the one-sided test gains power; misspecification can make the gap
/// positive even when X and Y are conditionally independent.
pub fn estimate_omega_stfr<F: Float>(
    oracle: &OraclePredictors<F>,
    loss: LossFunction,
    n_draws: usize,
    stream: RngStream,
) -> GapEstimate<F> {
    assert_draws(n_draws);
    let data = oracle.sample(stream, n_draws);
    let full = row_losses(loss, &oracle.g1_star.predict_matrix(&data.xz()), data.y());
    let blind = row_losses(loss, &oracle.g2_star.predict_matrix(data.z()), data.y());
    let scores: Vec<F> = blind
        .iter()
        .zip(&full)
        .map(|(&b, &f)| b - f)
        .collect();
    summarize(&scores, GapKind::OmegaStfr)
}

/// Estimates the expected residual product E[(X − g₁*(Z))(Y − g₂*(Z))]
/// that the residual-product statistic concentrates around.
///
/// Uses the residual role convention: both predictors read `z` rows, slot
/// 1 for the X regression and slot 2 for the Y regression.  The gap is
/// doubly robust — it vanishes under conditional independence whenever
/// either regression matches its true conditional mean.
pub fn estimate_omega_gcm<F: Float>(
    oracle: &OraclePredictors<F>,
    n_draws: usize,
    stream: RngStream,
) -> GapEstimate<F> {
    assert_draws(n_draws);
    let data = oracle.sample(stream, n_draws);
    assert_eq!(data.x().cols(), 1, "residual products need scalar x");
    assert_eq!(data.y().cols(), 1, "residual products need scalar y");
    let gx = oracle.g1_star.predict_column(data.z());
    let gy = oracle.g2_star.predict_column(data.z());
    let scores: Vec<F> = (0..n_draws)
        .map(|i| (data.x().get(i, 0) - gx[i]) * (data.y().get(i, 0) - gy[i]))
        .collect();
    summarize(&scores, GapKind::OmegaGcm)
}

/// Estimates one of the misspecification deltas.
///
/// `Delta1`, `Delta2`, and `DeltaBayes` are risk differences evaluated on
/// fresh draws under the loss-comparison role convention.  `DeltaSmall1`
/// and `DeltaSmall2` use the residual convention and measure the pointwise
/// spread between the limiting and optimal regressions, scoring
/// `loss(g_j*(Z), f_j*(Z))` per draw.
///
/// # Panics
///
/// If `kind` names one of the omega gaps, which have their own estimators.
pub fn estimate_delta<F: Float>(
    oracle: &OraclePredictors<F>,
    kind: GapKind,
    loss: LossFunction,
    n_draws: usize,
    stream: RngStream,
) -> GapEstimate<F> {
    assert_draws(n_draws);
    let data = oracle.sample(stream, n_draws);
    let diff = |a: Vec<F>, b: Vec<F>| -> Vec<F> {
        a.into_iter().zip(b).map(|(ai, bi)| ai - bi).collect()
    };
    let scores = match kind {
        GapKind::Delta1 => {
            let xz = data.xz();
            diff(
                row_losses(loss, &oracle.g1_star.predict_matrix(&xz), data.y()),
                row_losses(loss, &oracle.f1_star.predict_matrix(&xz), data.y()),
            )
        }
        GapKind::Delta2 => diff(
            row_losses(loss, &oracle.g2_star.predict_matrix(data.z()), data.y()),
            row_losses(loss, &oracle.f2_star.predict_matrix(data.z()), data.y()),
        ),
        GapKind::DeltaBayes => diff(
            row_losses(loss, &oracle.f2_star.predict_matrix(data.z()), data.y()),
            row_losses(loss, &oracle.f1_star.predict_matrix(&data.xz()), data.y()),
        ),
        GapKind::DeltaSmall1 => row_losses(
            loss,
            &oracle.g1_star.predict_matrix(data.z()),
            &oracle.f1_star.predict_matrix(data.z()),
        ),
        GapKind::DeltaSmall2 => row_losses(
            loss,
            &oracle.g2_star.predict_matrix(data.z()),
            &oracle.f2_star.predict_matrix(data.z()),
        ),
        other => panic!("estimate_delta covers the delta kinds, not {other:?}"),
    };
    summarize(&scores, kind)
}

/// Estimates the Jensen penalty ℓ(g(X, Z), Y) − ℓ(∫g dP_{X|Z}, Y) paid for
/// averaging a prediction over the exact conditional before scoring it.
///
/// Nonnegative in expectation for every convex loss; zero when `g`
/// ignores x.
pub fn jensen_gap<F: Float>(
    oracle: &OraclePredictors<F>,
    g: &dyn Predictor<F>,
    loss: LossFunction,
    n_draws: usize,
    stream: RngStream,
) -> Result<GapEstimate<F>, TheoryError> {
    assert_draws(n_draws);
    if !loss.convex() {
        return Err(TheoryError::NonConvexLoss);
    }
    let data = oracle.sample(stream.substream(0), n_draws);
    let plug_in = g.predict_matrix(&data.xz());
    let integration = stream.substream(1);
    let mut scores = Vec::with_capacity(n_draws);
    for i in 0..n_draws {
        let config = IntegrationConfig {
            stream: integration.substream(i as u64),
            ..IntegrationConfig::default()
        };
        let averaged = rb_integrate(g, data.z().row(i), &oracle.x_given_z, config)?;
        let y = data.y().row(i);
        scores.push(loss.evaluate_vec(plug_in.row(i), y) - loss.evaluate_vec(&averaged, y));
    }
    Ok(summarize(&scores, GapKind::OmegaRbpt2Jensen))
}

/// Estimates the drift ℓ(∫g dQ*, Y) − ℓ(∫g dP_{X|Z}, Y) introduced by
/// averaging over a surrogate conditional `q_star` instead of the exact
/// one.
///
/// Zero when `q_star` matches the declared conditional; small whenever the
/// two laws are close in total variation, the loss is Lipschitz, and `g`
/// is bounded ([`tv_condition_check`] audits that reading).
pub fn omega_rbpt_1<F: Float>(
    oracle: &OraclePredictors<F>,
    g: &dyn Predictor<F>,
    q_star: &ConditionalModel<F>,
    loss: LossFunction,
    n_draws: usize,
    stream: RngStream,
) -> Result<GapEstimate<F>, TheoryError> {
    assert_draws(n_draws);
    let data = oracle.sample(stream.substream(0), n_draws);
    let surrogate_streams = stream.substream(1);
    let exact_streams = stream.substream(2);
    let mut scores = Vec::with_capacity(n_draws);
    for i in 0..n_draws {
        let z_row = data.z().row(i);
        let surrogate = rb_integrate(
            g,
            z_row,
            q_star,
            IntegrationConfig {
                stream: surrogate_streams.substream(i as u64),
                ..IntegrationConfig::default()
            },
        )?;
        let exact = rb_integrate(
            g,
            z_row,
            &oracle.x_given_z,
            IntegrationConfig {
                stream: exact_streams.substream(i as u64),
                ..IntegrationConfig::default()
            },
        )?;
        let y = data.y().row(i);
        scores.push(loss.evaluate_vec(&surrogate, y) - loss.evaluate_vec(&exact, y));
    }
    Ok(summarize(&scores, GapKind::OmegaRbpt1))
}

/// Whether a rejection-rate forecast models a one- or two-tailed normal
/// test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tails {
    One,
    Two,
}

/// Forecasts the asymptotic rejection probability of a normal test whose
/// statistic drifts at rate √n·ω/σ.
///
/// One-sided: 1 − Φ(τ_α − √n·ω/σ).  Two-sided: the same tail at level α/2
/// plus the mirrored tail Φ(−τ_{α/2} − √n·ω/σ).  With ω = 0 both reduce
/// to α exactly.
pub fn predicted_rejection_rate<F: Float>(
    omega: F,
    sigma: F,
    n: usize,
    alpha: F,
    tails: Tails,
) -> Result<F, TheoryError> {
    if !(sigma > F::zero()) {
        return Err(TheoryError::DomainError {
            what: "score scale sigma",
            value: sigma.to_f64(),
        });
    }
    if n == 0 {
        return Err(TheoryError::DomainError {
            what: "test-split size n",
            value: 0.0,
        });
    }
    if !(alpha > F::zero() && alpha < F::one()) {
        return Err(TheoryError::DomainError {
            what: "level alpha",
            value: alpha.to_f64(),
        });
    }
    let drift = F::cast(n).sqrt() * omega / sigma;
    let rate = match tails {
        Tails::One => {
            let tau = std_normal_quantile(F::one() - alpha).expect("level is already validated");
            F::one() - std_normal_cdf(tau - drift)
        }
        Tails::Two => {
            let tau = std_normal_quantile(F::one() - alpha / F::cast(2.0))
                .expect("level is already validated");
            F::one() - std_normal_cdf(tau - drift) + std_normal_cdf(-tau - drift)
        }
    };
    Ok(rate)
}

/// Total variation distance between two Gaussians with common scale and
/// means `mean_shift` apart: 2Φ(|Δμ| / (2·scale)) − 1.
pub fn gaussian_tv<F: Float>(mean_shift: F, scale: F) -> F {
    assert!(
        scale > F::zero(),
        "total variation needs a positive scale"
    );
    let two = F::cast(2.0);
    two * std_normal_cdf(mean_shift.abs() / (two * scale)) - F::one()
}

/// Chi-square divergence of N(μ + θ, 1) from N(μ, 1): exp(θ²) − 1.
pub fn gaussian_chi2_shift<F: Float>(theta: F) -> F {
    (theta * theta).exp_m1()
}

/// Outcome of [`tv_condition_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TvConditionReport<F> {
    /// Whether the surrogate misfit `e_tv` stays below ω₂ / (2ML), the
    /// regime in which the surrogate drift cannot swamp the Jensen
    /// penalty.
    pub condition_holds: bool,
    /// The resulting bound 2ML·e_tv − ω₂ on the combined drift; negative
    /// exactly when the condition holds.
    pub omega_total_upper: F,
}

/// Audits whether a surrogate conditional is close enough, in expected
/// total variation `e_tv`, for the combined drift ω₁ − ω₂ to stay
/// nonpositive given a prediction sup bound `sup_bound` and a loss
/// Lipschitz constant `lipschitz`.
///
/// When the condition holds, the two estimates are also cross-checked:
/// ω₁ − ω₂ must not exceed three combined standard errors above zero.
pub fn tv_condition_check<F: Float>(
    omega_1: &GapEstimate<F>,
    omega_2: &GapEstimate<F>,
    sup_bound: F,
    lipschitz: F,
    e_tv: F,
) -> Result<TvConditionReport<F>, TheoryError> {
    if !(sup_bound > F::zero()) {
        return Err(TheoryError::DomainError {
            what: "prediction sup bound",
            value: sup_bound.to_f64(),
        });
    }
    if !(lipschitz > F::zero()) {
        return Err(TheoryError::DomainError {
            what: "loss Lipschitz constant",
            value: lipschitz.to_f64(),
        });
    }
    let two_ml = F::cast(2.0) * sup_bound * lipschitz;
    let condition_holds = e_tv <= omega_2.value / two_ml;
    let omega_total_upper = two_ml * e_tv - omega_2.value;
    if condition_holds {
        let combined =
            (omega_1.std_error * omega_1.std_error + omega_2.std_error * omega_2.std_error).sqrt();
        assert!(
            omega_1.value - omega_2.value <= F::cast(3.0) * combined,
            "surrogate drift {} exceeds the Jensen penalty {} by more than three combined \
             standard errors even though the total-variation condition holds",
            omega_1.value.to_f64(),
            omega_2.value.to_f64(),
        );
    }
    Ok(TvConditionReport {
        condition_holds,
        omega_total_upper,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::methods::test_support::shared_quadratic_data;
    use crate::models::FnPredictor;
    use crate::rng::RngStream;
    use rand::Rng;

    fn quadratic_oracle() -> OraclePredictors<f64> {
        OraclePredictors {
            g1_star: Box::new(FnPredictor::scalar(2, |r| 0.75 * r[0] + r[1])),
            g2_star: Box::new(FnPredictor::scalar(1, |r| r[0])),
            f1_star: Box::new(FnPredictor::scalar(2, |r| r[1] + r[1] * r[1])),
            f2_star: Box::new(FnPredictor::scalar(1, |r| r[0] + r[0] * r[0])),
            sampler: Box::new(|stream, n| shared_quadratic_data(n, stream)),
            x_given_z: ConditionalModel::gaussian_shift(|z: &[f64]| z[0] * z[0], 1.0, 0.0),
        }
    }

    fn sine_data(stream: RngStream, n: usize) -> Dataset<f64> {
        let mut rng = stream.rng();
        let mut x = Matrix::zeros(n, 1);
        let mut y = Matrix::zeros(n, 1);
        let mut z = Matrix::zeros(n, 1);
        for i in 0..n {
            let zi = f64::standard_normal(&mut rng);
            let xi = f64::standard_normal(&mut rng);
            let yi = zi + xi.sin() + f64::standard_normal(&mut rng);
            x.set(i, 0, xi);
            y.set(i, 0, yi);
            z.set(i, 0, zi);
        }
        Dataset::new(x, y, z).unwrap()
    }

    fn sine_oracle(x_coefficient: f64) -> OraclePredictors<f64> {
        OraclePredictors {
            g1_star: Box::new(FnPredictor::scalar(2, move |r| {
                x_coefficient * r[0] + r[1]
            })),
            g2_star: Box::new(FnPredictor::scalar(1, |r| r[0])),
            f1_star: Box::new(FnPredictor::scalar(2, |r: &[f64]| r[1] + r[0].sin())),
            f2_star: Box::new(FnPredictor::scalar(1, |r| r[0])),
            sampler: Box::new(sine_data),
            x_given_z: ConditionalModel::gaussian_shift(|_: &[f64]| 0.0, 1.0, 0.0),
        }
    }

    /// Residual-convention oracle on Z ~ N(0,1), X = Z + e_x,
    /// Y = -Z + e_y: slot 1 predicts X from Z with drift `drift_1`·Z, slot
    /// 2 predicts Y from Z with drift `drift_2`·Z.
    fn residual_oracle(drift_1: f64, drift_2: f64) -> OraclePredictors<f64> {
        OraclePredictors {
            g1_star: Box::new(FnPredictor::scalar(1, move |r| (1.0 + drift_1) * r[0])),
            g2_star: Box::new(FnPredictor::scalar(1, move |r| (-1.0 + drift_2) * r[0])),
            f1_star: Box::new(FnPredictor::scalar(1, |r| r[0])),
            f2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| -r[0])),
            sampler: Box::new(|stream, n| {
                let mut rng = stream.rng();
                let mut x = Matrix::zeros(n, 1);
                let mut y = Matrix::zeros(n, 1);
                let mut z = Matrix::zeros(n, 1);
                for i in 0..n {
                    let zi = f64::standard_normal(&mut rng);
                    x.set(i, 0, zi + f64::standard_normal(&mut rng));
                    y.set(i, 0, -zi + f64::standard_normal(&mut rng));
                    z.set(i, 0, zi);
                }
                Dataset::new(x, y, z).unwrap()
            }),
            x_given_z: ConditionalModel::gaussian_shift(|z: &[f64]| z[0], 1.0, 0.0),
        }
    }

    #[test]
    fn identical_predictors_leave_no_gap() {
        let oracle = OraclePredictors {
            g1_star: Box::new(FnPredictor::scalar(2, |r| 3.0 * r[1] - 1.0)),
            g2_star: Box::new(FnPredictor::scalar(1, |r| 3.0 * r[0] - 1.0)),
            f1_star: Box::new(FnPredictor::scalar(2, |r| 3.0 * r[1] - 1.0)),
            f2_star: Box::new(FnPredictor::scalar(1, |r| 3.0 * r[0] - 1.0)),
            sampler: Box::new(sine_data),
            x_given_z: ConditionalModel::gaussian_shift(|_: &[f64]| 0.0, 1.0, 0.0),
        };
        let est = estimate_omega_stfr(
            &oracle,
            LossFunction::SquaredL2,
            500,
            RngStream::new(41, 0),
        );
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.n_draws, 500);
        assert_eq!(est.gap_kind, GapKind::OmegaStfr);
    }

    #[test]
    fn quadratic_example_gaps_match_their_closed_forms() {
        // Y = Z + Z^2 + e_y regressed without intercept: the full linear
        // class solves diag(E[X^2], E[Z^2]) beta = (E[XY], E[ZY]) with
        // X = Z^2 + e_x, giving g1(x, z) = 0.75x + z, g2(z) = z, risks
        // 1.75 and 4, and a limiting gap of 2.25 despite the null holding.
        let oracle = quadratic_oracle();
        let n = 150_000;
        let loss = LossFunction::SquaredL2;

        let omega = estimate_omega_stfr(&oracle, loss, n, RngStream::new(1300, 1));
        assert!(omega.value > 3.0 * omega.std_error);
        assert!((omega.value - 2.25).abs() <= 3.0 * omega.std_error);

        let d1 = estimate_delta(&oracle, GapKind::Delta1, loss, n, RngStream::new(1300, 2));
        let d2 = estimate_delta(&oracle, GapKind::Delta2, loss, n, RngStream::new(1300, 3));
        let db = estimate_delta(
            &oracle,
            GapKind::DeltaBayes,
            loss,
            n,
            RngStream::new(1300, 4),
        );
        assert!((d1.value - 0.75).abs() <= 3.0 * d1.std_error);
        assert!((d2.value - 3.0).abs() <= 3.0 * d2.std_error);
        // Here x carries no information about y beyond z, so the two
        // unrestricted optima coincide and their risk spread is exactly 0.
        assert_eq!(db.value, 0.0);
        assert_eq!(db.std_error, 0.0);

        // The three deltas recompose the stfr gap: omega = bayes + d2 - d1.
        let recomposed = db.value + d2.value - d1.value;
        let combined = (omega.std_error.powi(2)
            + d1.std_error.powi(2)
            + d2.std_error.powi(2)
            + db.std_error.powi(2))
        .sqrt();
        assert!((recomposed - omega.value).abs() <= 3.0 * combined);
    }

    #[test]
    fn risk_gap_orderings_hold_on_the_quadratic_example() {
        let oracle = quadratic_oracle();
        let n = 20_000;
        let loss = LossFunction::SquaredL2;
        let omega = estimate_omega_stfr(&oracle, loss, n, RngStream::new(1400, 1));
        let d1 = estimate_delta(&oracle, GapKind::Delta1, loss, n, RngStream::new(1400, 2));
        let d2 = estimate_delta(&oracle, GapKind::Delta2, loss, n, RngStream::new(1400, 3));
        let db = estimate_delta(
            &oracle,
            GapKind::DeltaBayes,
            loss,
            n,
            RngStream::new(1400, 4),
        );

        let se = |a: &GapEstimate<f64>, b: &GapEstimate<f64>| {
            (a.std_error.powi(2) + b.std_error.powi(2)).sqrt()
        };
        // The gap is never smaller than the oracle spread minus the full
        // fit's own misspecification.
        assert!(db.value - d1.value <= omega.value + 3.0 * se(&db, &d1) + 3.0 * omega.std_error);
        // This distribution satisfies the null, so the gap is capped by
        // the x-blind misspecification.
        assert!(omega.value <= d2.value + 3.0 * se(&omega, &d2));
    }

    #[test]
    fn sine_example_gap_tracks_the_x_coefficient() {
        // Y = Z + sin(X) + e with X, Z independent standard normals.  The
        // best linear-in-(x, z) predictor has x-coefficient
        // E[X sin X] = exp(-1/2) by Stein's identity, and the resulting
        // risk gap over the x-blind fit is exp(-1).  Zeroing the
        // x-coefficient collapses the full fit onto the x-blind one, so
        // the gap vanishes identically.
        let zeroed = sine_oracle(0.0);
        let est = estimate_omega_stfr(
            &zeroed,
            LossFunction::SquaredL2,
            100_000,
            RngStream::new(2100, 0),
        );
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);

        let coefficient = (-0.5f64).exp();
        let informed = sine_oracle(coefficient);
        let est = estimate_omega_stfr(
            &informed,
            LossFunction::SquaredL2,
            100_000,
            RngStream::new(2100, 1),
        );
        assert!(est.value > 3.0 * est.std_error);
        assert!((est.value - (-1.0f64).exp()).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn residual_products_detect_only_joint_drift() {
        let n = 50_000;
        // Both regressions exact: the product averages to zero.
        let exact = estimate_omega_gcm(&residual_oracle(0.0, 0.0), n, RngStream::new(52, 0));
        assert!(exact.value.abs() <= 3.0 * exact.std_error);
        assert_eq!(exact.gap_kind, GapKind::OmegaGcm);

        // One exact regression is enough.
        let half = estimate_omega_gcm(&residual_oracle(0.0, 1.0), n, RngStream::new(52, 1));
        assert!(half.value.abs() <= 3.0 * half.std_error);
        let other = estimate_omega_gcm(&residual_oracle(1.0, 0.0), n, RngStream::new(52, 2));
        assert!(other.value.abs() <= 3.0 * other.std_error);

        // Correlated drifts survive the product: both regressions off by
        // Z leaves E[Z^2] = 1.
        let both = estimate_omega_gcm(&residual_oracle(-1.0, -1.0), n, RngStream::new(52, 3));
        assert!(both.value > 3.0 * both.std_error);
        assert!((both.value - 1.0).abs() <= 3.0 * both.std_error);
    }

    #[test]
    fn pointwise_drifts_match_their_second_moments() {
        let n = 50_000;
        let loss = LossFunction::SquaredL2;
        let oracle = residual_oracle(-1.0, -1.0);
        let d1 = estimate_delta(&oracle, GapKind::DeltaSmall1, loss, n, RngStream::new(53, 0));
        let d2 = estimate_delta(&oracle, GapKind::DeltaSmall2, loss, n, RngStream::new(53, 1));
        // Both limiting fits sit exactly Z away from the truth, so the
        // squared drift is E[Z^2] = 1.
        assert!((d1.value - 1.0).abs() <= 3.0 * d1.std_error);
        assert!((d2.value - 1.0).abs() <= 3.0 * d2.std_error);
        assert_eq!(d1.gap_kind, GapKind::DeltaSmall1);
    }

    #[test]
    #[should_panic(expected = "delta kinds")]
    fn omega_kinds_are_rejected_by_the_delta_estimator() {
        let oracle = quadratic_oracle();
        estimate_delta(
            &oracle,
            GapKind::OmegaStfr,
            LossFunction::SquaredL2,
            200,
            RngStream::new(54, 0),
        );
    }

    #[test]
    fn standard_errors_shrink_like_the_root_of_the_draw_count() {
        let oracle = quadratic_oracle();
        let loss = LossFunction::SquaredL2;
        let coarse = estimate_omega_stfr(&oracle, loss, 400, RngStream::new(55, 0));
        let fine = estimate_omega_stfr(&oracle, loss, 40_000, RngStream::new(55, 1));
        let ratio = coarse.std_error / fine.std_error;
        assert!(
            ratio > 5.0 && ratio < 20.0,
            "expected a tenfold shrink, got {ratio}"
        );
    }

    #[test]
    fn forecast_matches_a_fixed_predictor_simulation() {
        // A pair whose score gap is constant plus Gaussian noise, so the
        // normal limit is exact at every sample size and the forecast can
        // be held to a tight band: g1 is the true regression z + z^2 and
        // g2 offsets it by 0.6, giving scores 0.36 - 1.2·e_y.
        let offset = 0.6;
        let oracle = OraclePredictors {
            g1_star: Box::new(FnPredictor::scalar(2, |r| r[1] + r[1] * r[1])),
            g2_star: Box::new(FnPredictor::scalar(1, move |r| r[0] + r[0] * r[0] + offset)),
            f1_star: Box::new(FnPredictor::scalar(2, |r| r[1] + r[1] * r[1])),
            f2_star: Box::new(FnPredictor::scalar(1, |r| r[0] + r[0] * r[0])),
            sampler: Box::new(|stream, n| shared_quadratic_data(n, stream)),
            x_given_z: ConditionalModel::gaussian_shift(|z: &[f64]| z[0] * z[0], 1.0, 0.0),
        };
        let loss = LossFunction::SquaredL2;
        let alpha = 0.05;

        let reference = estimate_omega_stfr(&oracle, loss, 1_000_000, RngStream::new(7100, 0));
        let sigma_pop = reference.std_error * (reference.n_draws as f64).sqrt();
        let tau = std_normal_quantile(1.0 - alpha).unwrap();

        for (n, label) in [(50usize, 1u64), (200, 2)] {
            let predicted =
                predicted_rejection_rate(reference.value, sigma_pop, n, alpha, Tails::One)
                    .unwrap();
            let reps = 1_000u64;
            let mut rejections = 0usize;
            for rep in 0..reps {
                let data = oracle.sample(RngStream::new(7100, label).substream(rep), n);
                let scores: Vec<f64> = (0..n)
                    .map(|i| {
                        let z = data.z().get(i, 0);
                        let y = data.y().get(i, 0);
                        let blind = z + z * z + offset - y;
                        let full = z + z * z - y;
                        blind * blind - full * full
                    })
                    .collect();
                let (mean, sigma) = mean_and_sigma_hat(&scores).unwrap();
                let lambda = (n as f64).sqrt() * mean / sigma;
                if lambda > tau {
                    rejections += 1;
                }
            }
            let empirical = rejections as f64 / reps as f64;
            assert!(
                (empirical - predicted).abs() < 0.05,
                "n = {n}: predicted {predicted:.4}, simulated {empirical:.4}"
            );
        }
    }

    #[test]
    fn averaging_an_x_free_predictor_costs_nothing() {
        let oracle = quadratic_oracle();
        let g = FnPredictor::scalar(2, |r: &[f64]| 3.0 * r[1] + 1.0);
        for loss in [LossFunction::SquaredL2, LossFunction::AbsoluteL1] {
            let est = jensen_gap(&oracle, &g, loss, 2_000, RngStream::new(61, 0)).unwrap();
            assert!(est.value.abs() < 1e-10);
            assert!(est.std_error < 1e-10);
            assert_eq!(est.gap_kind, GapKind::OmegaRbpt2Jensen);
        }
    }

    #[test]
    fn jensen_penalty_of_the_identity_is_the_conditional_variance() {
        // g(x, z) = x under squared loss: averaging first replaces X by
        // E[X | Z], and the expected penalty telescopes to Var(X | Z) = 1
        // regardless of the response.
        let oracle = quadratic_oracle();
        let g = FnPredictor::scalar(2, |r: &[f64]| r[0]);
        let est = jensen_gap(
            &oracle,
            &g,
            LossFunction::SquaredL2,
            50_000,
            RngStream::new(61, 1),
        )
        .unwrap();
        assert!((est.value - 1.0).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn jensen_penalty_is_never_significantly_negative() {
        use crate::simgen::{draw_generative_params, gen_quadratic};
        for k in 0..6u64 {
            let params = draw_generative_params::<f64>(2, RngStream::new(9000, k));
            let sampler_params = params.clone();
            let oracle = OraclePredictors {
                g1_star: Box::new(FnPredictor::scalar(3, |_| 0.0)),
                g2_star: Box::new(FnPredictor::scalar(2, |_| 0.0)),
                f1_star: Box::new(FnPredictor::scalar(3, |_| 0.0)),
                f2_star: Box::new(FnPredictor::scalar(2, |_| 0.0)),
                sampler: Box::new(move |stream, n| gen_quadratic(&sampler_params, n, stream)),
                x_given_z: ConditionalModel::gaussian_shift(
                    move |z: &[f64]| params.x_mean(z),
                    1.0,
                    0.0,
                ),
            };
            let mut coefficients = RngStream::new(9100, k).rng();
            let (a, b, c) = (
                f64::standard_normal(&mut coefficients),
                f64::standard_normal(&mut coefficients),
                f64::standard_normal(&mut coefficients),
            );
            let g = FnPredictor::scalar(3, move |r: &[f64]| {
                a * r[0] + b * r[0] * r[0] + c * (r[1] - r[2])
            });
            let loss = if k % 2 == 0 {
                LossFunction::SquaredL2
            } else {
                LossFunction::AbsoluteL1
            };
            let est = jensen_gap(&oracle, &g, loss, 4_000, RngStream::new(9200, k)).unwrap();
            assert!(
                est.value >= -3.0 * est.std_error,
                "instance {k}: penalty {} below -3 x {}",
                est.value,
                est.std_error
            );
        }
    }

    #[test]
    fn exact_surrogate_leaves_no_drift() {
        let oracle = quadratic_oracle();
        let g = FnPredictor::scalar(2, |r: &[f64]| 0.4 * r[0] - r[1]);
        let q = ConditionalModel::gaussian_shift(|z: &[f64]| z[0] * z[0], 1.0, 0.0);
        let est = omega_rbpt_1(
            &oracle,
            &g,
            &q,
            LossFunction::SquaredL2,
            2_000,
            RngStream::new(62, 0),
        )
        .unwrap();
        assert_eq!(est.value, 0.0);
        assert_eq!(est.std_error, 0.0);
        assert_eq!(est.gap_kind, GapKind::OmegaRbpt1);
    }

    #[test]
    fn shifted_surrogate_drift_matches_its_expansion() {
        // With g(x, z) = x and squared loss the integrated predictions are
        // the conditional means, so a surrogate shifted by theta scores
        // theta^2 + 2·theta·(E[X|Z] - Y) per draw; under this distribution
        // E[E[X|Z] - Y] = 0, leaving exactly theta^2.
        let theta = 0.7;
        let oracle = quadratic_oracle();
        let g = FnPredictor::scalar(2, |r: &[f64]| r[0]);
        let q = ConditionalModel::gaussian_shift(|z: &[f64]| z[0] * z[0], 1.0, theta);
        let est = omega_rbpt_1(
            &oracle,
            &g,
            &q,
            LossFunction::SquaredL2,
            30_000,
            RngStream::new(62, 1),
        )
        .unwrap();
        assert!((est.value - theta * theta).abs() <= 3.0 * est.std_error);
    }

    #[test]
    fn bounded_predictor_passes_the_tv_audit() {
        // Bounded response and bounded predictor, so the Lipschitz radius
        // is explicit: |tanh(x)| <= 1 and |y| <= 1.5 keep every score
        // inside radius 2.5.
        let oracle = OraclePredictors {
            g1_star: Box::new(FnPredictor::scalar(2, |_| 0.0)),
            g2_star: Box::new(FnPredictor::scalar(1, |_| 0.0)),
            f1_star: Box::new(FnPredictor::scalar(2, |_| 0.0)),
            f2_star: Box::new(FnPredictor::scalar(1, |_| 0.0)),
            sampler: Box::new(|stream, n| {
                let mut rng = stream.rng();
                let mut x = Matrix::zeros(n, 1);
                let mut y = Matrix::zeros(n, 1);
                let mut z = Matrix::zeros(n, 1);
                for i in 0..n {
                    let zi = f64::standard_normal(&mut rng);
                    x.set(i, 0, zi + f64::standard_normal(&mut rng));
                    y.set(i, 0, zi.tanh() + 0.5 * rng.random_range(-1.0..1.0));
                    z.set(i, 0, zi);
                }
                Dataset::new(x, y, z).unwrap()
            }),
            x_given_z: ConditionalModel::gaussian_shift(|z: &[f64]| z[0], 1.0, 0.0),
        };
        let g = FnPredictor::scalar(2, |r: &[f64]| r[0].tanh()).with_sup_bound(1.0);
        let loss = LossFunction::SquaredL2;
        let sup_bound = 1.0;
        let lipschitz = loss.lipschitz_const(2.5);
        let theta = 0.02;

        let omega_2 = jensen_gap(&oracle, &g, loss, 20_000, RngStream::new(63, 0)).unwrap();
        assert!(omega_2.value > 0.15);

        let q = ConditionalModel::gaussian_shift(|z: &[f64]| z[0], 1.0, theta);
        let omega_1 =
            omega_rbpt_1(&oracle, &g, &q, loss, 20_000, RngStream::new(63, 1)).unwrap();
        let e_tv = gaussian_tv(theta, 1.0);
        assert!(
            omega_1.value.abs() <= 2.0 * sup_bound * lipschitz * e_tv + 3.0 * omega_1.std_error
        );

        let report = tv_condition_check(&omega_1, &omega_2, sup_bound, lipschitz, e_tv).unwrap();
        assert!(report.condition_holds);
        assert!(report.omega_total_upper < 0.0);
    }

    #[test]
    fn forecast_hits_frozen_normal_tails() {
        // Zero drift rejects at exactly the level, either sidedness.
        for tails in [Tails::One, Tails::Two] {
            for alpha in [0.05f64, 0.1] {
                let rate = predicted_rejection_rate(0.0, 1.0, 50, alpha, tails).unwrap();
                assert!((rate - alpha).abs() < 1e-8);
            }
        }
        // Unit drift at level 0.1: 1 - Phi(tau_{0.1} - 1).
        let rate: f64 = predicted_rejection_rate(1.0, 10.0, 100, 0.1, Tails::One).unwrap();
        assert!((rate - 0.389_143_691_645_360_97).abs() < 1e-8);
        // Overwhelming drift saturates.
        let rate: f64 = predicted_rejection_rate(5.0, 1.0, 400, 0.05, Tails::One).unwrap();
        assert!(rate > 1.0 - 1e-12);
        // The two-sided forecast is symmetric in the drift sign.
        let up: f64 = predicted_rejection_rate(0.3, 1.0, 64, 0.05, Tails::Two).unwrap();
        let down: f64 = predicted_rejection_rate(-0.3, 1.0, 64, 0.05, Tails::Two).unwrap();
        assert!((up - down).abs() < 1e-12);
    }

    #[test]
    fn forecast_rejects_bad_arguments() {
        assert_eq!(
            predicted_rejection_rate(0.5, 0.0, 50, 0.05, Tails::One),
            Err(TheoryError::DomainError {
                what: "score scale sigma",
                value: 0.0
            })
        );
        assert!(matches!(
            predicted_rejection_rate(0.5, -1.0, 50, 0.05, Tails::One),
            Err(TheoryError::DomainError { .. })
        ));
        assert_eq!(
            predicted_rejection_rate(0.5, 1.0, 0, 0.05, Tails::One),
            Err(TheoryError::DomainError {
                what: "test-split size n",
                value: 0.0
            })
        );
        assert!(matches!(
            predicted_rejection_rate(0.5, 1.0, 50, 1.0, Tails::Two),
            Err(TheoryError::DomainError { .. })
        ));
    }

    #[test]
    fn divergences_match_their_frozen_values() {
        assert_eq!(gaussian_tv::<f64>(0.0, 1.0), 0.0);
        assert!((gaussian_tv::<f64>(2.0, 1.0) - 0.682_689_492_137_085_9).abs() < 1e-12);
        assert_eq!(gaussian_tv::<f64>(-2.0, 1.0), gaussian_tv(2.0, 1.0));
        assert_eq!(gaussian_tv::<f64>(1.0, 0.5), gaussian_tv(2.0, 1.0));
        assert!(gaussian_tv::<f64>(0.5, 1.0) < gaussian_tv(1.0, 1.0));
        assert!(gaussian_tv::<f64>(1.0, 1.0) < gaussian_tv(2.0, 1.0));

        assert_eq!(gaussian_chi2_shift::<f64>(0.0), 0.0);
        assert!((gaussian_chi2_shift::<f64>(1.0) - 1.718_281_828_459_045_2).abs() < 1e-12);
        assert!((gaussian_chi2_shift::<f64>(0.5) - 0.284_025_416_687_741_48).abs() < 1e-12);
        assert_eq!(gaussian_chi2_shift::<f64>(-1.0), gaussian_chi2_shift(1.0));
    }

    #[test]
    #[should_panic(expected = "positive scale")]
    fn zero_scale_has_no_total_variation() {
        gaussian_tv::<f64>(1.0, 0.0);
    }

    #[test]
    fn divergences_match_numeric_integration() {
        // Composite Simpson's rule over a grid wide enough that the
        // truncated tails are far below the tolerance.
        fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, intervals: usize) -> f64 {
            let n = intervals + intervals % 2;
            let h = (hi - lo) / n as f64;
            let mut total = f(lo) + f(hi);
            for k in 1..n {
                let weight = if k % 2 == 1 { 4.0 } else { 2.0 };
                total += weight * f(lo + h * k as f64);
            }
            total * h / 3.0
        }
        let phi = |x: f64| (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
        for theta in [0.1, 0.5, 1.0, 2.0] {
            let tv = simpson(
                |x| 0.5 * (phi(x) - phi(x - theta)).abs(),
                -9.0,
                9.0 + theta,
                40_000,
            );
            assert!(
                (gaussian_tv(theta, 1.0) - tv).abs() < 1e-6,
                "tv mismatch at theta = {theta}"
            );
            let chi2 = simpson(
                |x| {
                    let q = phi(x - theta);
                    q * q / phi(x)
                },
                -9.0,
                9.0 + 2.0 * theta,
                60_000,
            ) - 1.0;
            assert!(
                (gaussian_chi2_shift(theta) - chi2).abs() < 1e-6,
                "chi2 mismatch at theta = {theta}"
            );
        }
    }

    #[test]
    fn tv_condition_boundary_cases() {
        let gap = |value: f64, std_error: f64, gap_kind| GapEstimate {
            value,
            std_error,
            n_draws: 1_000,
            gap_kind,
        };
        let omega_1 = gap(0.0, 0.01, GapKind::OmegaRbpt1);
        let omega_2 = gap(0.4, 0.01, GapKind::OmegaRbpt2Jensen);

        // Exactly on the boundary: 0.1 <= 0.4 / (2 * 1 * 2).
        let report = tv_condition_check(&omega_1, &omega_2, 1.0, 2.0, 0.1).unwrap();
        assert!(report.condition_holds);
        assert!(report.omega_total_upper.abs() < 1e-15);

        // Just past it the condition fails and the bound goes positive.
        let report = tv_condition_check(&omega_1, &omega_2, 1.0, 2.0, 0.11).unwrap();
        assert!(!report.condition_holds);
        assert!((report.omega_total_upper - 0.04).abs() < 1e-12);

        // A perfectly matched surrogate qualifies whenever the Jensen
        // penalty is nonnegative.
        let report = tv_condition_check(&omega_1, &omega_2, 1.0, 2.0, 0.0).unwrap();
        assert!(report.condition_holds);
        assert_eq!(report.omega_total_upper, -0.4);

        assert!(matches!(
            tv_condition_check(&omega_1, &omega_2, 0.0, 2.0, 0.1),
            Err(TheoryError::DomainError {
                what: "prediction sup bound",
                ..
            })
        ));
        assert!(matches!(
            tv_condition_check(&omega_1, &omega_2, 1.0, -2.0, 0.1),
            Err(TheoryError::DomainError {
                what: "loss Lipschitz constant",
                ..
            })
        ));
    }

    #[test]
    #[should_panic(expected = "three combined")]
    fn inconsistent_estimates_trip_the_audit() {
        let omega_1 = GapEstimate {
            value: 1.0,
            std_error: 0.001,
            n_draws: 1_000,
            gap_kind: GapKind::OmegaRbpt1,
        };
        let omega_2 = GapEstimate {
            value: 0.5,
            std_error: 0.001,
            n_draws: 1_000,
            gap_kind: GapKind::OmegaRbpt2Jensen,
        };
        let _ = tv_condition_check(&omega_1, &omega_2, 1.0, 1.0, 0.1);
    }

    #[test]
    fn gap_kind_names_are_stable() {
        let kinds = [
            (GapKind::OmegaStfr, "omega_stfr"),
            (GapKind::OmegaGcm, "omega_gcm"),
            (GapKind::OmegaRbpt1, "omega_rbpt1"),
            (GapKind::OmegaRbpt2Jensen, "omega_rbpt2_jensen"),
            (GapKind::Delta1, "delta1"),
            (GapKind::Delta2, "delta2"),
            (GapKind::DeltaBayes, "delta_bayes"),
            (GapKind::DeltaSmall1, "delta_small1"),
            (GapKind::DeltaSmall2, "delta_small2"),
        ];
        for (kind, expected) in kinds {
            assert_eq!(kind.name(), expected);
            assert_eq!(kind.to_string(), expected);
        }
    }
}
