//! Loss comparison against the fit's own average over a model of X
//! given Z.

use crate::float::Float;
use crate::loss::LossFunction;
use crate::matrix::Dataset;
use crate::methods::{row_losses, score_one_sided, MethodError};
use crate::models::{rb_integrate, ConditionalModel, IntegrationConfig, ModelFactory};
use crate::stats::{Method, TestOutcome};

const DEGENERATE_HINT: &str = "the integrated and plug-in predictions score every test row \
     identically; the stfr test with rho > 0 stays usable in this regime";

/// Tests conditional independence by comparing a fit of Y on (X, Z)
/// against the same fit averaged over a conditional model of X given Z.
///
/// The factory is fitted once on the training split.  For each test row
/// the fitted predictor is integrated over `q` at that row's Z (see
/// [`rb_integrate`]), and the row is scored by
/// `loss(integrated) - loss(plug-in)`.  Under the null and a convex loss
/// the integrated prediction cannot do worse on average no matter how
/// badly the regression itself is specified, which is what makes this
/// family robust; the studentized score mean is compared against the
/// upper normal tail.  No second regression of Y on Z is needed, and no
/// artificial noise is added.
///
/// Monte Carlo integration draws from a fresh substream of
/// `integration.stream` per test row, so results do not depend on row
/// evaluation order.
pub fn rbpt<F: Float>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    factory: &dyn ModelFactory<F>,
    q: &ConditionalModel<F>,
    loss: LossFunction,
    integration: IntegrationConfig,
) -> Result<TestOutcome<F>, MethodError> {
    if !loss.convex() {
        return Err(MethodError::NonConvexLoss);
    }
    let fit = factory.fit(&train.xz(), train.y())?;
    let plug_in = row_losses(loss, &fit.predict_matrix(&test.xz()), test.y());

    let mut scores = Vec::with_capacity(test.n_rows());
    for i in 0..test.n_rows() {
        let row_config = IntegrationConfig {
            stream: integration.stream.substream(i as u64),
            ..integration
        };
        let integrated = rb_integrate(fit.as_ref(), test.z().row(i), q, row_config)?;
        scores.push(loss.evaluate_vec(&integrated, test.y().row(i)) - plug_in[i]);
    }
    score_one_sided(Method::Rbpt, &scores, DEGENERATE_HINT)
}

/// Variant of [`rbpt`] that learns the averaged prediction instead of
/// integrating it.
///
/// After fitting `factory_g` on `[X | Z]`, a second regression from
/// `factory_h` is fitted on the training rows to reproduce the first
/// fit's predictions from Z alone.  Test rows are scored by
/// `loss(h(z)) - loss(g(x, z))` exactly as in [`rbpt`].  This trades the
/// explicit conditional model for a second function class, which must be
/// rich enough to track the conditional average of the first fit.
pub fn rbpt2<F: Float>(
    train: &Dataset<F>,
    test: &Dataset<F>,
    factory_g: &dyn ModelFactory<F>,
    factory_h: &dyn ModelFactory<F>,
    loss: LossFunction,
) -> Result<TestOutcome<F>, MethodError> {
    if !loss.convex() {
        return Err(MethodError::NonConvexLoss);
    }
    let fit_g = factory_g.fit(&train.xz(), train.y())?;
    let g_on_train = fit_g.predict_matrix(&train.xz());
    let fit_h = factory_h.fit(train.z(), &g_on_train)?;

    let plug_in = row_losses(loss, &fit_g.predict_matrix(&test.xz()), test.y());
    let averaged = row_losses(loss, &fit_h.predict_matrix(test.z()), test.y());
    let scores: Vec<F> = averaged
        .iter()
        .zip(&plug_in)
        .map(|(&a, &p)| a - p)
        .collect();
    score_one_sided(Method::Rbpt2, &scores, DEGENERATE_HINT)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::Matrix;
    use crate::methods::test_support::{linear_null_data, zero_factory};
    use crate::models::{
        BoxedPredictor, FnPredictor, KrrFactory, LinearModel, LogisticModel, ModelError,
        OlsFactory,
    };
    use crate::rng::RngStream;
    use crate::simgen::{draw_generative_params, gen_quadratic};

    fn identity_in_x_factory(
        features: &Matrix<f64>,
        _targets: &Matrix<f64>,
    ) -> Result<BoxedPredictor<f64>, ModelError> {
        Ok(Box::new(FnPredictor::scalar(features.cols(), |row| row[0])))
    }

    fn fair_coin_conditional() -> ConditionalModel<f64> {
        let zero_logit = LinearModel::new(Matrix::zeros(1, 1), vec![0.0]);
        ConditionalModel::logistic_binary(LogisticModel::new(zero_logit))
    }

    #[test]
    fn two_point_hand_computation() {
        // g(x, z) = x and a fair binary conditional make the integrated
        // prediction 1/2 everywhere.  With targets (0, 0) and observed
        // x (0, 1) the scores are (1/4, 1/4 - 1) under squared loss.
        let x = Matrix::column(vec![0.0, 1.0]);
        let y = Matrix::column(vec![0.0, 0.0]);
        let z = Matrix::zeros(2, 1);
        let data = Dataset::new(x, y, z).unwrap();
        let out = rbpt(
            &data,
            &data,
            &identity_in_x_factory,
            &fair_coin_conditional(),
            LossFunction::SquaredL2,
            IntegrationConfig::default(),
        )
        .unwrap();
        assert!((out.t_bar - (-0.25)).abs() < 1e-15);
        assert!((out.sigma_hat - 0.5).abs() < 1e-15);
        assert!((out.statistic - (-0.707_106_781_186_547_6)).abs() < 1e-12);
        assert!((out.p_value - 0.760_249_938_906_523_3).abs() < 1e-12);
    }

    #[test]
    fn correct_conditional_keeps_scores_nonpositive_on_average() {
        // With the true conditional of X given Z, the averaged score mean
        // should sit at or below zero no matter how misspecified the
        // regression is.
        let reps = 100;
        let mut t_bars = Vec::with_capacity(reps);
        for r in 0..reps {
            let stream = RngStream::new(10_000, r as u64);
            let params = draw_generative_params::<f64>(3, stream);
            let data = gen_quadratic(&params, 300, stream.substream(1));
            let (train, test) = data.split_at(200);
            let b = params.b.clone();
            let q = ConditionalModel::gaussian_shift(
                move |z: &[f64]| {
                    let bz: f64 = b.iter().zip(z).map(|(&p, &q)| p * q).sum();
                    bz * bz
                },
                1.0,
                0.0,
            );
            let out = rbpt(
                &train,
                &test,
                &OlsFactory::default(),
                &q,
                LossFunction::SquaredL2,
                IntegrationConfig::default(),
            )
            .unwrap();
            t_bars.push(out.t_bar);
        }
        let mean = t_bars.iter().sum::<f64>() / reps as f64;
        let var = t_bars.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(mean <= 2.0 * se, "mean score {mean} exceeds 2 se = {}", 2.0 * se);
    }

    #[test]
    fn x_blind_fit_is_degenerate_and_the_hint_names_stfr() {
        let data = linear_null_data(60, 1, RngStream::new(10_100, 0));
        let (train, test) = data.split_at(30);
        let q = ConditionalModel::gaussian_shift(|z: &[f64]| z[0], 1.0, 0.0);
        let err = rbpt(
            &train,
            &test,
            &zero_factory,
            &q,
            LossFunction::SquaredL2,
            IntegrationConfig::default(),
        )
        .unwrap_err();
        match err {
            MethodError::DegenerateVariance { hint, .. } => {
                assert!(hint.contains("stfr"), "hint should point at stfr: {hint}");
                assert!(hint.contains("rho > 0"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn monte_carlo_integration_is_deterministic_per_stream() {
        let data = linear_null_data(80, 2, RngStream::new(10_200, 0));
        let (train, test) = data.split_at(40);
        let q = ConditionalModel::gaussian_shift(|z: &[f64]| z[0] + z[1], 1.0, 0.0);
        let run = |stream| {
            rbpt(
                &train,
                &test,
                &OlsFactory::default(),
                &q,
                LossFunction::SquaredL2,
                IntegrationConfig::monte_carlo(50, stream),
            )
            .unwrap()
        };
        let a = run(RngStream::new(10_200, 1));
        let b = run(RngStream::new(10_200, 1));
        assert_eq!(a.statistic, b.statistic);
        let c = run(RngStream::new(10_200, 2));
        assert_ne!(a.statistic, c.statistic);

        // Quadrature and Monte Carlo agree up to sampling error.
        let exact = rbpt(
            &train,
            &test,
            &OlsFactory::default(),
            &q,
            LossFunction::SquaredL2,
            IntegrationConfig::default(),
        )
        .unwrap();
        let mc = rbpt(
            &train,
            &test,
            &OlsFactory::default(),
            &q,
            LossFunction::SquaredL2,
            IntegrationConfig::monte_carlo(4_000, RngStream::new(10_200, 3)),
        )
        .unwrap();
        assert!(
            (exact.t_bar - mc.t_bar).abs() < 0.05,
            "quadrature {} vs monte carlo {}",
            exact.t_bar,
            mc.t_bar
        );
    }

    #[test]
    fn learned_average_tracks_a_linear_fit() {
        let reps = 100;
        let mut t_bars = Vec::with_capacity(reps);
        for r in 0..reps {
            let data = linear_null_data(300, 3, RngStream::new(10_300, r as u64));
            let (train, test) = data.split_at(200);
            let out = rbpt2(
                &train,
                &test,
                &OlsFactory::default(),
                &OlsFactory::default(),
                LossFunction::SquaredL2,
            )
            .unwrap();
            t_bars.push(out.t_bar);
        }
        let mean = t_bars.iter().sum::<f64>() / reps as f64;
        let var = t_bars.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (reps - 1) as f64;
        let se = (var / reps as f64).sqrt();
        assert!(mean <= 2.0 * se, "mean score {mean} exceeds 2 se = {}", 2.0 * se);
    }

    #[test]
    fn learned_average_works_with_a_kernel_second_stage() {
        let params = draw_generative_params::<f64>(2, RngStream::new(10_400, 0));
        let data = gen_quadratic(&params, 240, RngStream::new(10_400, 1));
        let (train, test) = data.split_at(160);
        let out = rbpt2(
            &train,
            &test,
            &OlsFactory::default(),
            &KrrFactory::default(),
            LossFunction::SquaredL2,
        )
        .unwrap();
        assert!(out.p_value >= 0.0 && out.p_value <= 1.0);
        let again = rbpt2(
            &train,
            &test,
            &OlsFactory::default(),
            &KrrFactory::default(),
            LossFunction::SquaredL2,
        )
        .unwrap();
        assert_eq!(out.statistic, again.statistic);
    }

    #[test]
    fn perfectly_reproduced_first_stage_is_degenerate() {
        // The first stage ignores X entirely, so an exact second stage
        // matches it and every score is zero.
        let data = linear_null_data(60, 2, RngStream::new(10_500, 0));
        let (train, test) = data.split_at(30);
        let err = rbpt2(
            &train,
            &test,
            &zero_factory,
            &OlsFactory::default(),
            LossFunction::SquaredL2,
        )
        .unwrap_err();
        assert!(matches!(err, MethodError::DegenerateVariance { .. }));
    }
}
