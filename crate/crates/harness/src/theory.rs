//! Population-gap studies on built-in oracle fixtures.
//!
//! Each fixture is a distribution whose limiting and optimal predictors
//! are known in closed form, so the Monte Carlo gap estimates can be
//! checked against hand arithmetic, and the forecast
//! `predicted_rejection_rate` can be compared with the rejection rate of
//! an actually simulated loss-comparison test holding its predictors
//! fixed.

use serde::Serialize;

use ci_robust_core::models::FnPredictor;
use ci_robust_core::rng::RngStream;
use ci_robust_core::stats::{mean_and_sigma_hat, std_normal_quantile};
use ci_robust_core::theory::{
    estimate_delta, estimate_omega_gcm, estimate_omega_stfr, predicted_rejection_rate,
};
use ci_robust_core::{
    ConditionalModel, Dataset64, Float, GapEstimate, GapKind, Matrix64, OraclePredictors, Tails,
};

use crate::config::{TheoryConfig, TheoryFixture};
use crate::runner::HarnessError;

/// One line of the predicted-versus-empirical rejection table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CalibrationRow {
    /// Test-split size fed to the forecast and to the simulation.
    pub n: usize,
    /// Estimated population score mean.
    pub omega: f64,
    /// Estimated population score standard deviation.
    pub sigma: f64,
    /// Normal-theory rejection forecast at the config's level.
    pub predicted: f64,
    /// Rejection rate of the simulated fixed-predictor test.
    pub empirical: f64,
    pub abs_diff: f64,
}

/// Everything the `theory` subcommand produces for one fixture.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TheoryReport {
    pub config: TheoryConfig,
    /// Monte Carlo estimates of the fixture's population gaps.
    pub gaps: Vec<GapEstimate<f64>>,
    pub calibration: Vec<CalibrationRow>,
}

impl TheoryReport {
    /// Renders the calibration table with a fixed column set.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record([
            "n",
            "omega",
            "sigma",
            "predicted_rate",
            "empirical_rate",
            "abs_diff",
        ])?;
        for row in &self.calibration {
            writer.write_record(&[
                row.n.to_string(),
                row.omega.to_string(),
                row.sigma.to_string(),
                row.predicted.to_string(),
                row.empirical.to_string(),
                row.abs_diff.to_string(),
            ])?;
        }
        writer.flush().expect("an in-memory writer cannot fail");
        let bytes = writer.into_inner().expect("the writer was flushed");
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }
}

fn standard_normal_column(rng: &mut ci_robust_core::StreamRng, n: usize) -> Vec<f64> {
    (0..n).map(|_| f64::standard_normal(rng)).collect()
}

/// `Y = Z + Z^2 + e_y`, `X = Z^2 + e_x`, `Z ~ N(0, 1)`: the limiting
/// linear fit leans on `X` as a proxy for the unexplained `Z^2`, so the
/// with-x comparison keeps an order-one gap even though `X` carries no
/// information beyond `Z`.
fn quadratic_example() -> OraclePredictors<f64> {
    OraclePredictors {
        g1_star: Box::new(FnPredictor::scalar(2, |r: &[f64]| 0.75 * r[0] + r[1])),
        g2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0])),
        f1_star: Box::new(FnPredictor::scalar(2, |r: &[f64]| r[1] + r[1] * r[1])),
        f2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0] + r[0] * r[0])),
        sampler: Box::new(|stream, n| {
            let mut rng = stream.rng();
            let z = standard_normal_column(&mut rng, n);
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for &zi in &z {
                x.push(zi * zi + f64::standard_normal(&mut rng));
                y.push(zi + zi * zi + f64::standard_normal(&mut rng));
            }
            Dataset64::new(Matrix64::column(x), Matrix64::column(y), Matrix64::column(z))
                .expect("all columns share a length")
        }),
        x_given_z: ConditionalModel::gaussian_shift(|z: &[f64]| z[0] * z[0], 1.0, 0.0),
    }
}

/// Residual-role companion of [`quadratic_example`]: both slots hold the
/// true conditional means, `E[X | Z] = Z^2` and `E[Y | Z] = Z + Z^2`.
fn quadratic_example_residual() -> OraclePredictors<f64> {
    let base = quadratic_example();
    OraclePredictors {
        g1_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0] * r[0])),
        g2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0] + r[0] * r[0])),
        f1_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0] * r[0])),
        f2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0] + r[0] * r[0])),
        sampler: base.sampler,
        x_given_z: base.x_given_z,
    }
}

/// `Y = Z + sin(X) + e`, `X` and `Z` independent standard normals.  The
/// best linear coefficient on `X` is `E[X sin X] = exp(-1/2)` (Stein's
/// identity), so the with-x linear fit beats the x-free one by
/// `exp(-1/2)^2 = exp(-1)` in squared-loss risk.
fn sine_example() -> OraclePredictors<f64> {
    let beta = (-0.5f64).exp();
    OraclePredictors {
        g1_star: Box::new(FnPredictor::scalar(2, move |r: &[f64]| beta * r[0] + r[1])),
        g2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0])),
        f1_star: Box::new(FnPredictor::scalar(2, |r: &[f64]| r[1] + r[0].sin())),
        f2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0])),
        sampler: Box::new(|stream, n| {
            let mut rng = stream.rng();
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            let mut z = Vec::with_capacity(n);
            for _ in 0..n {
                let zi = f64::standard_normal(&mut rng);
                let xi = f64::standard_normal(&mut rng);
                x.push(xi);
                z.push(zi);
                y.push(zi + xi.sin() + f64::standard_normal(&mut rng));
            }
            Dataset64::new(Matrix64::column(x), Matrix64::column(y), Matrix64::column(z))
                .expect("all columns share a length")
        }),
        x_given_z: ConditionalModel::gaussian_shift(|_z: &[f64]| 0.0, 1.0, 0.0),
    }
}

/// Residual-role companion of [`sine_example`]: `E[X | Z] = 0` and
/// `E[Y | Z] = Z`, so the expected residual product is
/// `E[X sin X] = exp(-1/2)`.
fn sine_example_residual() -> OraclePredictors<f64> {
    let base = sine_example();
    OraclePredictors {
        g1_star: Box::new(FnPredictor::scalar(1, |_r: &[f64]| 0.0)),
        g2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0])),
        f1_star: Box::new(FnPredictor::scalar(1, |_r: &[f64]| 0.0)),
        f2_star: Box::new(FnPredictor::scalar(1, |r: &[f64]| r[0])),
        sampler: base.sampler,
        x_given_z: base.x_given_z,
    }
}

fn build_fixtures(fixture: TheoryFixture) -> (OraclePredictors<f64>, OraclePredictors<f64>) {
    match fixture {
        TheoryFixture::QuadraticExample => (quadratic_example(), quadratic_example_residual()),
        TheoryFixture::SineExample => (sine_example(), sine_example_residual()),
    }
}

/// Estimates the fixture's gaps and tabulates forecast accuracy.
pub fn run_theory(config: &TheoryConfig) -> Result<TheoryReport, HarnessError> {
    let (oracle, residual) = build_fixtures(config.fixture);
    let seed = config.base_seed;
    let stream = |id: u64| RngStream::new(seed, id);

    let omega = estimate_omega_stfr(&oracle, config.loss, config.n_draws, stream(10));
    let gaps = vec![
        omega,
        estimate_omega_gcm(&residual, config.n_draws, stream(11)),
        estimate_delta(&oracle, GapKind::Delta1, config.loss, config.n_draws, stream(12)),
        estimate_delta(&oracle, GapKind::Delta2, config.loss, config.n_draws, stream(13)),
        estimate_delta(&oracle, GapKind::DeltaBayes, config.loss, config.n_draws, stream(14)),
    ];

    let sigma = omega.std_error * (omega.n_draws as f64).sqrt();
    let tau = std_normal_quantile(1.0 - config.alpha).expect("the level is validated");
    let mut calibration = Vec::with_capacity(config.sample_sizes.len());
    for &n in &config.sample_sizes {
        let predicted = predicted_rejection_rate(omega.value, sigma, n, config.alpha, Tails::One)?;
        let mut rejections = 0usize;
        for rep in 0..config.calibration_reps {
            let rep_stream = stream(20).substream(n as u64).substream(rep as u64);
            if simulate_fixed_predictor_test(&oracle, config, n, rep_stream) > tau {
                rejections += 1;
            }
        }
        let empirical = rejections as f64 / config.calibration_reps as f64;
        calibration.push(CalibrationRow {
            n,
            omega: omega.value,
            sigma,
            predicted,
            empirical,
            abs_diff: (predicted - empirical).abs(),
        });
    }

    Ok(TheoryReport {
        config: config.clone(),
        gaps,
        calibration,
    })
}

/// Draws `n` fresh rows, scores the fixture's limiting predictors, and
/// returns the studentized score mean (`-inf` when the scores collapse,
/// so callers count it as a non-rejection).
fn simulate_fixed_predictor_test(
    oracle: &OraclePredictors<f64>,
    config: &TheoryConfig,
    n: usize,
    stream: RngStream,
) -> f64 {
    let data = oracle.sample(stream, n);
    let xz = data.xz();
    let with_x = oracle.g1_star.predict_matrix(&xz);
    let without_x = oracle.g2_star.predict_matrix(data.z());
    let scores: Vec<f64> = (0..n)
        .map(|i| {
            let y = data.y().get(i, 0);
            config.loss.evaluate(without_x.get(i, 0), y) - config.loss.evaluate(with_x.get(i, 0), y)
        })
        .collect();
    let (mean, sd) = mean_and_sigma_hat(&scores).expect("oracle scores are finite");
    if sd == 0.0 {
        return f64::NEG_INFINITY;
    }
    (n as f64).sqrt() * mean / sd
}
