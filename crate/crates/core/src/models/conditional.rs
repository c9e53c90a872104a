//! Models of X given Z: sampling and integration of predictors against
//! them.

use std::collections::HashMap;
use std::sync::{Arc, LazyLock, Mutex};

use crate::float::Float;
use crate::linalg::sym_eigen;
use crate::matrix::{DimensionMismatch, Matrix};
use crate::rng::{RngStream, StreamRng};

use super::{LogisticModel, ModelError, Predictor};

/// Number of quadrature nodes used for Gaussian conditionals; exact for
/// polynomial integrands up to degree 63.
const GAUSS_NODES: usize = 32;

/// A model of the conditional distribution of X given Z, used both for
/// drawing resamples and for integrating a regression over X.
#[derive(Clone)]
pub enum ConditionalModel<F: Float> {
    /// Scalar Gaussian: X | Z = z ~ N(mean(z) + shift, scale²). The
    /// `shift` field exists so calibration sweeps can perturb a fixed
    /// mean function without rebuilding it.
    GaussianShift {
        mean: Arc<dyn Fn(&[F]) -> F + Send + Sync>,
        scale: F,
        shift: F,
    },
    /// Binary X with P(X = 1 | Z = z) given by a fitted classifier.
    LogisticBinary { model: Arc<LogisticModel<F>> },
    /// Arbitrary sampler for X | Z = z; only Monte Carlo integration is
    /// available.
    UserSampler {
        dim_x: usize,
        sampler: Arc<dyn Fn(&[F], &mut StreamRng) -> Vec<F> + Send + Sync>,
    },
}

impl<F: Float> ConditionalModel<F> {
    pub fn gaussian_shift(
        mean: impl Fn(&[F]) -> F + Send + Sync + 'static,
        scale: F,
        shift: F,
    ) -> Self {
        assert!(scale > F::zero(), "conditional scale must be positive");
        Self::GaussianShift {
            mean: Arc::new(mean),
            scale,
            shift,
        }
    }

    pub fn logistic_binary(model: LogisticModel<F>) -> Self {
        Self::LogisticBinary {
            model: Arc::new(model),
        }
    }

    pub fn user_sampler(
        dim_x: usize,
        sampler: impl Fn(&[F], &mut StreamRng) -> Vec<F> + Send + Sync + 'static,
    ) -> Self {
        Self::UserSampler {
            dim_x,
            sampler: Arc::new(sampler),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Self::GaussianShift { .. } => "gaussian-shift",
            Self::LogisticBinary { .. } => "logistic-binary",
            Self::UserSampler { .. } => "user-sampler",
        }
    }

    /// Width of the X vectors this model produces.
    pub fn dim_x(&self) -> usize {
        match self {
            Self::GaussianShift { .. } | Self::LogisticBinary { .. } => 1,
            Self::UserSampler { dim_x, .. } => *dim_x,
        }
    }

    /// Conditional density (or probability mass) of a scalar x at z, when
    /// the model has one in closed form.
    pub fn density(&self, x: F, z_row: &[F]) -> Option<F> {
        match self {
            Self::GaussianShift { mean, scale, shift } => {
                let center = mean(z_row) + *shift;
                let standardized = (x - center) / *scale;
                let tau = F::cast(std::f64::consts::TAU);
                Some((-(standardized * standardized) / F::cast(2.0)).exp() / (*scale * tau.sqrt()))
            }
            Self::LogisticBinary { model } => {
                let p = model.probability(z_row);
                Some(if x > F::cast(0.5) { p } else { F::one() - p })
            }
            Self::UserSampler { .. } => None,
        }
    }

    /// Draws one X from the conditional at z, advancing the caller's
    /// generator.
    pub fn sample_with(&self, z_row: &[F], rng: &mut StreamRng) -> Vec<F> {
        match self {
            Self::GaussianShift { mean, scale, shift } => {
                vec![mean(z_row) + *shift + *scale * F::standard_normal(rng)]
            }
            Self::LogisticBinary { model } => {
                let p = model.probability(z_row);
                vec![if F::uniform(rng) < p { F::one() } else { F::zero() }]
            }
            Self::UserSampler { sampler, dim_x } => {
                let draw = sampler(z_row, rng);
                debug_assert_eq!(draw.len(), *dim_x);
                draw
            }
        }
    }
}

/// Draws one X from the conditional at z, with randomness fully
/// determined by the stream.
pub fn sample_conditional<F: Float>(
    q: &ConditionalModel<F>,
    z_row: &[F],
    stream: RngStream,
) -> Vec<F> {
    q.sample_with(z_row, &mut stream.rng())
}

/// How [`rb_integrate`] evaluates the integral.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegrationMode {
    /// Quadrature or an exact sum where the model supports it, Monte
    /// Carlo otherwise.
    Auto,
    /// Gauss–Hermite quadrature; only Gaussian conditionals qualify.
    Quadrature,
    /// Sample average over draws from the conditional.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy)]
pub struct IntegrationConfig {
    pub mode: IntegrationMode,
    /// Draw count for Monte Carlo integration.
    pub mc_draws: usize,
    /// Randomness source for Monte Carlo integration; ignored by the
    /// deterministic routes.
    pub stream: RngStream,
}

impl Default for IntegrationConfig {
    fn default() -> Self {
        Self {
            mode: IntegrationMode::Auto,
            mc_draws: 100,
            stream: RngStream::new(0, 0),
        }
    }
}

impl IntegrationConfig {
    pub fn monte_carlo(draws: usize, stream: RngStream) -> Self {
        Self {
            mode: IntegrationMode::MonteCarlo,
            mc_draws: draws,
            stream,
        }
    }
}

/// Integrates a fitted predictor over X at fixed z:
/// returns ∫ g(x, z) dQ(x | z), one value per model output.
///
/// The predictor must accept rows laid out as the X block followed by the
/// Z block, the same convention the hypothesis tests fit under.
pub fn rb_integrate<F: Float>(
    g: &dyn Predictor<F>,
    z_row: &[F],
    q: &ConditionalModel<F>,
    config: IntegrationConfig,
) -> Result<Vec<F>, ModelError> {
    let expected = q.dim_x() + z_row.len();
    if g.input_dim() != expected {
        return Err(DimensionMismatch {
            context: "integrated predictor input width",
            expected,
            got: g.input_dim(),
        }
        .into());
    }

    match (config.mode, q) {
        (IntegrationMode::MonteCarlo, _) => monte_carlo(g, z_row, q, config),
        (
            IntegrationMode::Auto | IntegrationMode::Quadrature,
            ConditionalModel::GaussianShift { mean, scale, shift },
        ) => {
            let center = mean(z_row) + *shift;
            gauss_hermite_integral(g, z_row, center, *scale)
        }
        (IntegrationMode::Auto, ConditionalModel::LogisticBinary { model }) => {
            if model.input_dim() != z_row.len() {
                return Err(DimensionMismatch {
                    context: "conditional model feature width",
                    expected: z_row.len(),
                    got: model.input_dim(),
                }
                .into());
            }
            let p = model.probability(z_row);
            let mut row = Vec::with_capacity(1 + z_row.len());
            row.push(F::one());
            row.extend_from_slice(z_row);
            let on = g.predict_row(&row);
            row[0] = F::zero();
            let off = g.predict_row(&row);
            Ok(on
                .iter()
                .zip(&off)
                .map(|(&a, &b)| p * a + (F::one() - p) * b)
                .collect())
        }
        (IntegrationMode::Auto, ConditionalModel::UserSampler { .. }) => {
            monte_carlo(g, z_row, q, config)
        }
        (IntegrationMode::Quadrature, other) => Err(ModelError::UnsupportedKind {
            operation: "quadrature integration",
            kind: other.kind_name(),
        }),
    }
}

fn monte_carlo<F: Float>(
    g: &dyn Predictor<F>,
    z_row: &[F],
    q: &ConditionalModel<F>,
    config: IntegrationConfig,
) -> Result<Vec<F>, ModelError> {
    if config.mc_draws == 0 {
        return Err(ModelError::InsufficientData { needed: 1, got: 0 });
    }
    let mut rng = config.stream.rng();
    let mut row = Vec::with_capacity(q.dim_x() + z_row.len());
    let mut total = vec![F::zero(); g.output_dim()];
    let mut pred = vec![F::zero(); g.output_dim()];
    for _ in 0..config.mc_draws {
        row.clear();
        row.extend(q.sample_with(z_row, &mut rng));
        row.extend_from_slice(z_row);
        g.predict_into(&row, &mut pred);
        for (t, &p) in total.iter_mut().zip(&pred) {
            *t += p;
        }
    }
    let inv = F::one() / F::cast(config.mc_draws);
    Ok(total.into_iter().map(|t| t * inv).collect())
}

fn gauss_hermite_integral<F: Float>(
    g: &dyn Predictor<F>,
    z_row: &[F],
    center: F,
    scale: F,
) -> Result<Vec<F>, ModelError> {
    let table = gauss_hermite_table(GAUSS_NODES)?;
    let sqrt2 = F::cast(2.0).sqrt();
    let norm = F::one() / F::cast(std::f64::consts::PI).sqrt();
    let mut row = Vec::with_capacity(1 + z_row.len());
    row.push(F::zero());
    row.extend_from_slice(z_row);
    let mut total = vec![F::zero(); g.output_dim()];
    let mut pred = vec![F::zero(); g.output_dim()];
    for (&node, &weight) in table.0.iter().zip(&table.1) {
        row[0] = center + sqrt2 * scale * F::cast(node);
        g.predict_into(&row, &mut pred);
        let w = F::cast(weight);
        for (t, &p) in total.iter_mut().zip(&pred) {
            *t += w * p;
        }
    }
    Ok(total.into_iter().map(|t| t * norm).collect())
}

static GH_TABLES: LazyLock<Mutex<HashMap<usize, Arc<(Vec<f64>, Vec<f64>)>>>> =
    LazyLock::new(|| Mutex::new(HashMap::new()));

/// Nodes and weights of n-point Gauss–Hermite quadrature (weight
/// function e^{-t²}), computed from the eigendecomposition of the Jacobi
/// matrix of the Hermite recurrence and cached per n.
///
/// Tables are computed in double precision regardless of the caller's
/// scalar type.
fn gauss_hermite_table(n: usize) -> Result<Arc<(Vec<f64>, Vec<f64>)>, ModelError> {
    let mut tables = GH_TABLES.lock().expect("quadrature cache poisoned");
    if let Some(table) = tables.get(&n) {
        return Ok(Arc::clone(table));
    }
    let mut jacobi = Matrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jacobi.set(k - 1, k, b);
        jacobi.set(k, k - 1, b);
    }
    let (nodes, vectors) = sym_eigen(&jacobi).map_err(|_| ModelError::NonConvergence {
        what: "quadrature eigenvalue iteration",
        iterations: 60,
    })?;
    let sqrt_pi = std::f64::consts::PI.sqrt();
    let weights: Vec<f64> = (0..n)
        .map(|k| {
            let first = vectors.get(0, k);
            sqrt_pi * first * first
        })
        .collect();
    let table = Arc::new((nodes, weights));
    tables.insert(n, Arc::clone(&table));
    Ok(table)
}

/// Public view of the quadrature rule, mostly for verification: nodes
/// ascending, weights matching, in the caller's scalar type.
pub fn gauss_hermite<F: Float>(n: usize) -> Result<(Vec<F>, Vec<F>), ModelError> {
    let table = gauss_hermite_table(n)?;
    Ok((
        table.0.iter().map(|&v| F::cast(v)).collect(),
        table.1.iter().map(|&v| F::cast(v)).collect(),
    ))
}
