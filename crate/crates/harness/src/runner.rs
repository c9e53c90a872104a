//! Replication loops, seed derivation, and report assembly.
//!
//! Randomness is organized as a tree rooted at the config's `base_seed`:
//! stream id 1 leads to per-replication streams (split further by
//! parameter draw and replication index) and stream id 2 to the per-draw
//! generative parameters.  Every replication derives all of its
//! randomness from its own stream, so results are independent of
//! scheduling order and any single replication can be replayed in
//! isolation.  Sweep points share these streams on purpose: a sweep is a
//! paired comparison along its grid, not a set of unrelated experiments.

use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use ci_robust_core::methods::{crt, gcm, rbpt, rbpt2, resit, stfr, StfrConfig};
use ci_robust_core::models::{fit_ols, IntegrationConfig, IntegrationMode};
use ci_robust_core::rng::{random_permutation, RngStream};
use ci_robust_core::simgen::{
    draw_generative_params, gen_highdim, gen_quadratic, semi_synthetic_null, HighDimDgpParams,
    QuadraticDgpParams, SimError,
};
use ci_robust_core::{ConditionalModel, Dataset64, Method, MethodError, Predictor, TestOutcome64};

use crate::config::{ConfigError, DgpSpec, ExperimentConfig, ResamplerSpec, SweepKey};
use crate::ingest::{self, IngestError};

/// Umbrella error for everything the harness can fail at.
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error("data generation failed: {0}")]
    Sim(#[from] SimError),
    #[error("the test could not run: {0}")]
    Method(#[from] MethodError),
    #[error("gap estimation failed: {0}")]
    Theory(#[from] ci_robust_core::TheoryError),
    #[error("cannot write {path}: {source}")]
    Output {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report serialization failed: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv rendering failed: {0}")]
    Csv(#[from] csv::Error),
    #[error("selfcheck failed: {0}")]
    SelfCheck(String),
}

/// A replication that could not produce a p-value.
#[derive(Debug, thiserror::Error)]
enum RepError {
    #[error(transparent)]
    Method(#[from] MethodError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

impl From<RepError> for HarnessError {
    fn from(err: RepError) -> Self {
        match err {
            RepError::Method(e) => HarnessError::Method(e),
            RepError::Sim(e) => HarnessError::Sim(e),
        }
    }
}

fn replication_stream(base_seed: u64, draw: u64, rep: u64) -> RngStream {
    RngStream::new(base_seed, 1).substream(draw).substream(rep)
}

fn param_stream(base_seed: u64, draw: u64) -> RngStream {
    RngStream::new(base_seed, 2).substream(draw)
}

/// One aggregated row of an experiment: a (sweep value, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    /// The swept value, absent when the config has no sweep.
    pub sweep_value: Option<f64>,
    pub method: Method,
    /// Share of all scheduled replications with `p <= alpha`; failed
    /// replications count toward the denominator but never reject.
    pub rejection_rate: f64,
    /// Binomial standard error of `rejection_rate`.
    pub mc_std_error: f64,
    /// Replications that errored instead of producing a p-value.
    pub degenerate_count: usize,
    /// Mean p-value over successful replications (NaN if none).
    pub mean_p: f64,
    pub wall_time_s: f64,
    /// Rejection rate within each generative parameter draw.
    pub draw_rejection_rates: Vec<f64>,
    /// Every p-value, ordered by (draw, replication); failed replications
    /// are skipped, so `rejection_rate` equals the count of dumped values
    /// at or below `alpha` divided by `param_draws * replications`.
    pub p_values: Vec<f64>,
}

/// A finished experiment: the resolved config plus one row per (sweep
/// value, method) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub config: ExperimentConfig,
    pub points: Vec<SweepPoint>,
}

impl Report {
    /// Renders the summary table with a fixed column set.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut writer = csv::Writer::from_writer(Vec::new());
        writer.write_record([
            "sweep_value",
            "method",
            "rejection_rate",
            "mc_se",
            "degenerate_count",
            "mean_p",
            "wall_time_s",
        ])?;
        for point in &self.points {
            writer.write_record(&[
                point.sweep_value.map(|v| v.to_string()).unwrap_or_default(),
                point.method.name().to_string(),
                point.rejection_rate.to_string(),
                point.mc_std_error.to_string(),
                point.degenerate_count.to_string(),
                point.mean_p.to_string(),
                point.wall_time_s.to_string(),
            ])?;
        }
        writer.flush().expect("an in-memory writer cannot fail");
        let bytes = writer.into_inner().expect("the writer was flushed");
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn to_json(&self) -> Result<String, serde_json::Error> {
        serde_json::to_string_pretty(self)
    }

    /// Zeroes the wall-clock fields, the only part of a report that two
    /// identical runs do not share.
    pub fn strip_timing(&mut self) {
        for point in &mut self.points {
            point.wall_time_s = 0.0;
        }
    }
}

/// Renders a single test outcome as a one-row CSV table.
pub fn outcome_csv(outcome: &TestOutcome64) -> Result<String, csv::Error> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(["method", "statistic", "p_value", "t_bar", "sigma_hat", "n_test"])?;
    writer.write_record(&[
        outcome.method.name().to_string(),
        outcome.statistic.to_string(),
        outcome.p_value.to_string(),
        outcome.t_bar.to_string(),
        outcome.sigma_hat.to_string(),
        outcome.n_test.to_string(),
    ])?;
    writer.flush().expect("an in-memory writer cannot fail");
    let bytes = writer.into_inner().expect("the writer was flushed");
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs every (sweep value, replication) cell of an experiment.
///
/// `jobs` bounds the worker threads (0 means one per core); the output
/// is identical for every value because each replication's randomness is
/// derived from its indices, never from execution order.
pub fn run_experiment(config: &ExperimentConfig, jobs: usize) -> Result<Report, HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .expect("a fresh thread pool can be built");
    let csv_data = load_csv_source(config)?;
    let grid: Vec<Option<f64>> = match &config.sweep {
        Some(sweep) => sweep.values.iter().copied().map(Some).collect(),
        None => vec![None],
    };
    let mut points = Vec::with_capacity(grid.len());
    for value in grid {
        let mut resolved = config.clone();
        if let (Some(v), Some(sweep)) = (value, &config.sweep) {
            apply_sweep(&mut resolved, sweep.key, v);
        }
        points.push(run_point(&pool, &resolved, csv_data.as_ref(), value));
    }
    Ok(Report {
        config: config.clone(),
        points,
    })
}

/// Runs the configured test once, on the first `n_train + n_test` rows,
/// using the streams of replication zero.
pub fn run_single_test(config: &ExperimentConfig) -> Result<TestOutcome64, HarnessError> {
    let csv_data = load_csv_source(config)?;
    let quad = draw_point_params(config, 0);
    let stream = replication_stream(config.base_seed, 0, 0);
    run_replication(config, quad.as_ref(), csv_data.as_ref(), stream).map_err(HarnessError::from)
}

fn load_csv_source(config: &ExperimentConfig) -> Result<Option<Dataset64>, HarnessError> {
    match &config.dgp {
        DgpSpec::Csv {
            path,
            x_cols,
            y_cols,
            z_cols,
            ..
        } => {
            let data = ingest::load_csv(Path::new(path), x_cols, y_cols, z_cols)?;
            let needed = config.n_train + config.n_test;
            if data.n_rows() < needed {
                return Err(ConfigError::BadValue {
                    key: "n_train".to_string(),
                    message: format!(
                        "n_train + n_test = {needed} rows requested but {path} has only {}",
                        data.n_rows()
                    ),
                }
                .into());
            }
            Ok(Some(data))
        }
        _ => Ok(None),
    }
}

fn apply_sweep(config: &mut ExperimentConfig, key: SweepKey, value: f64) {
    match key {
        SweepKey::Theta => config.theta = value,
        SweepKey::Gamma => {
            if let DgpSpec::Quadratic { gamma, .. } = &mut config.dgp {
                *gamma = value;
            }
        }
        SweepKey::C => {
            if let DgpSpec::Quadratic { c, .. } = &mut config.dgp {
                *c = value;
            }
        }
        SweepKey::Skew => {
            if let DgpSpec::Quadratic { skew, .. } = &mut config.dgp {
                *skew = value;
            }
        }
        SweepKey::DZ => {
            if let DgpSpec::Quadratic { d_z, .. } = &mut config.dgp {
                *d_z = value as usize;
            }
        }
    }
}

fn draw_point_params(config: &ExperimentConfig, draw: u64) -> Option<QuadraticDgpParams<f64>> {
    match &config.dgp {
        DgpSpec::Quadratic { d_z, c, gamma, skew } => {
            let mut params = draw_generative_params(*d_z, param_stream(config.base_seed, draw));
            params.c = *c;
            params.gamma = *gamma;
            params.skew_shape = *skew;
            params.theta = config.theta;
            Some(params)
        }
        _ => None,
    }
}

fn run_point(
    pool: &rayon::ThreadPool,
    resolved: &ExperimentConfig,
    csv: Option<&Dataset64>,
    sweep_value: Option<f64>,
) -> SweepPoint {
    let start = Instant::now();
    let quad_params: Vec<Option<QuadraticDgpParams<f64>>> = (0..resolved.param_draws)
        .map(|draw| draw_point_params(resolved, draw as u64))
        .collect();
    let total = resolved.param_draws * resolved.replications;
    let outcomes: Vec<Result<TestOutcome64, RepError>> = pool.install(|| {
        (0..total)
            .into_par_iter()
            .map(|i| {
                let draw = i / resolved.replications;
                let rep = i % resolved.replications;
                let stream = replication_stream(resolved.base_seed, draw as u64, rep as u64);
                run_replication(resolved, quad_params[draw].as_ref(), csv, stream)
            })
            .collect()
    });

    let mut p_values = Vec::new();
    let mut degenerate_count = 0usize;
    let mut draw_rejections = vec![0usize; resolved.param_draws];
    for (i, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(result) => {
                if result.p_value <= resolved.alpha {
                    draw_rejections[i / resolved.replications] += 1;
                }
                p_values.push(result.p_value);
            }
            Err(_) => degenerate_count += 1,
        }
    }
    let rejections: usize = draw_rejections.iter().sum();
    let rejection_rate = rejections as f64 / total as f64;
    let mc_std_error = (rejection_rate * (1.0 - rejection_rate) / total as f64).sqrt();
    let mean_p = if p_values.is_empty() {
        f64::NAN
    } else {
        p_values.iter().sum::<f64>() / p_values.len() as f64
    };
    SweepPoint {
        sweep_value,
        method: resolved.method,
        rejection_rate,
        mc_std_error,
        degenerate_count,
        mean_p,
        wall_time_s: start.elapsed().as_secs_f64(),
        draw_rejection_rates: draw_rejections
            .iter()
            .map(|&r| r as f64 / resolved.replications as f64)
            .collect(),
        p_values,
    }
}

fn run_replication(
    config: &ExperimentConfig,
    quad: Option<&QuadraticDgpParams<f64>>,
    csv: Option<&Dataset64>,
    stream: RngStream,
) -> Result<TestOutcome64, RepError> {
    let (train, test) = prepare_split(config, quad, csv, stream.substream(0))?;
    let method_stream = stream.substream(1);
    let factory = config.model.build(stream.substream(2).substream(0));
    match config.method {
        Method::Stfr => {
            let noise = StfrConfig {
                rho: config.rho_scale * train.y().column_std(0),
                alpha: config.alpha,
            };
            Ok(stfr(
                &train,
                &test,
                factory.as_ref(),
                config.loss,
                &noise,
                method_stream,
            )?)
        }
        Method::Gcm => {
            let factory_x = config.model_x.build(stream.substream(2).substream(1));
            let factory_y = config.model_y.build(stream.substream(2).substream(2));
            Ok(gcm(&train, &test, factory_x.as_ref(), factory_y.as_ref())?)
        }
        Method::Resit => {
            let factory_x = config.model_x.build(stream.substream(2).substream(1));
            let factory_y = config.model_y.build(stream.substream(2).substream(2));
            Ok(resit(
                &train,
                &test,
                factory_x.as_ref(),
                factory_y.as_ref(),
                config.resamples,
                method_stream,
            )?)
        }
        Method::Rbpt => {
            let q = build_resampler(config, quad, &train)?;
            let integration = IntegrationConfig {
                mode: IntegrationMode::Auto,
                mc_draws: 100,
                stream: method_stream,
            };
            Ok(rbpt(&train, &test, factory.as_ref(), &q, config.loss, integration)?)
        }
        Method::Rbpt2 => {
            let second = config.second_stage.build(stream.substream(2).substream(3));
            Ok(rbpt2(&train, &test, factory.as_ref(), second.as_ref(), config.loss)?)
        }
        Method::Crt => {
            let q = build_resampler(config, quad, &train)?;
            Ok(crt(
                &train,
                &test,
                factory.as_ref(),
                &q,
                config.loss,
                config.resamples,
                method_stream,
            )?)
        }
    }
}

fn prepare_split(
    config: &ExperimentConfig,
    quad: Option<&QuadraticDgpParams<f64>>,
    csv: Option<&Dataset64>,
    data_stream: RngStream,
) -> Result<(Dataset64, Dataset64), RepError> {
    let needed = config.n_train + config.n_test;
    let full = match &config.dgp {
        DgpSpec::Quadratic { .. } => gen_quadratic(
            quad.expect("quadratic parameters are drawn per draw"),
            needed,
            data_stream,
        ),
        DgpSpec::HighDim {
            variant,
            d,
            signal,
            sparsity,
        } => {
            let params = HighDimDgpParams {
                variant: *variant,
                n: needed,
                d: *d,
                signal: *signal,
                sparsity: *sparsity,
            };
            gen_highdim(&params, data_stream)
        }
        DgpSpec::Csv {
            n_bins,
            one_hot_z,
            shuffle,
            ..
        } => {
            let base = csv.expect("csv data is loaded before the replication loop");
            let mut data = match n_bins {
                Some(bins) => semi_synthetic_null(base, *bins, data_stream.substream(0))?,
                None => base.clone(),
            };
            if *one_hot_z {
                data = ingest::one_hot_z(&data);
            }
            if *shuffle {
                let mut rng = data_stream.substream(1).rng();
                let order = random_permutation(data.n_rows(), &mut rng);
                data = data.take_rows(&order);
            }
            let keep: Vec<usize> = (0..needed).collect();
            data.take_rows(&keep)
        }
    };
    Ok(full.split_at(config.n_train))
}

fn build_resampler(
    config: &ExperimentConfig,
    quad: Option<&QuadraticDgpParams<f64>>,
    train: &Dataset64,
) -> Result<ConditionalModel<f64>, RepError> {
    match config.resampler {
        ResamplerSpec::Exact => {
            let params = quad
                .expect("config validation ties the exact resampler to the quadratic design")
                .clone();
            Ok(ConditionalModel::gaussian_shift(
                move |z| params.x_mean(z),
                1.0,
                config.theta,
            ))
        }
        ResamplerSpec::Fitted => {
            if train.x().cols() != 1 {
                return Err(MethodError::UnsupportedDimension {
                    method: config.method,
                    what: "x",
                    got: train.x().cols(),
                }
                .into());
            }
            let model = fit_ols(train.z(), train.x(), true).map_err(MethodError::from)?;
            let fitted = model.predict_matrix(train.z());
            let n = train.n_rows();
            let mut sum_sq = 0.0;
            for i in 0..n {
                let r = train.x().get(i, 0) - fitted.get(i, 0);
                sum_sq += r * r;
            }
            let scale = (sum_sq / n as f64).sqrt().max(1e-8);
            Ok(ConditionalModel::gaussian_shift(
                move |z| model.predict_scalar(z),
                scale,
                config.theta,
            ))
        }
    }
}
