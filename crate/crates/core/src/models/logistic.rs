//! Penalized logistic regression fit by Newton's method.

use crate::float::Float;
use crate::linalg::solve_spd;
use crate::matrix::{DimensionMismatch, Matrix};

use super::{check_same_rows, BoxedPredictor, LinearModel, ModelError, ModelFactory, Predictor};

/// Coefficient penalty that keeps the optimum finite under separation.
const PENALTY: f64 = 1e-6;
const GRAD_TOL: f64 = 1e-8;
const MAX_NEWTON: usize = 100;
const MAX_HALVINGS: usize = 40;

/// A fitted binary classifier; predictions are probabilities of label 1.
#[derive(Debug, Clone)]
pub struct LogisticModel<F> {
    linear: LinearModel<F>,
}

impl<F: Float> LogisticModel<F> {
    /// Wraps a single-output linear model as the log-odds of label 1.
    pub fn new(linear: LinearModel<F>) -> Self {
        assert_eq!(
            Predictor::output_dim(&linear),
            1,
            "log-odds must be scalar"
        );
        LogisticModel { linear }
    }

    /// The underlying log-odds model.
    pub fn linear(&self) -> &LinearModel<F> {
        &self.linear
    }

    pub fn probability(&self, row: &[F]) -> F {
        sigmoid(self.linear.predict_scalar(row))
    }
}

impl<F: Float> Predictor<F> for LogisticModel<F> {
    fn input_dim(&self) -> usize {
        self.linear.input_dim()
    }

    fn output_dim(&self) -> usize {
        1
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        out[0] = self.probability(row);
    }

    fn sup_bound(&self) -> Option<F> {
        Some(F::one())
    }
}

fn sigmoid<F: Float>(t: F) -> F {
    if t >= F::zero() {
        F::one() / (F::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (F::one() + e)
    }
}

/// log(1 + e^t) without overflow for large |t|.
fn log1p_exp<F: Float>(t: F) -> F {
    t.max(F::zero()) + (-t.abs()).exp().ln_1p()
}

/// Penalized negative log-likelihood at the given log-odds values.
fn objective<F: Float>(logits: &[F], labels: &[F], beta: &[F], penalty: F) -> F {
    let mut nll = F::zero();
    for (&t, &y) in logits.iter().zip(labels) {
        nll += log1p_exp(t) - y * t;
    }
    nll + penalty * beta.iter().map(|&b| b * b).sum::<F>()
}

/// Fits L2-penalized logistic regression of binary labels on features,
/// with an intercept.
///
/// Newton iterations with step halving; the tiny quadratic penalty keeps
/// the problem strictly convex, so linearly separable inputs still have a
/// finite optimum.
pub fn fit_logistic<F: Float>(
    features: &Matrix<F>,
    labels: &Matrix<F>,
) -> Result<LogisticModel<F>, ModelError> {
    check_same_rows(features, labels)?;
    if labels.cols() != 1 {
        return Err(DimensionMismatch {
            context: "logistic label columns",
            expected: 1,
            got: labels.cols(),
        }
        .into());
    }
    let n = features.rows();
    if n == 0 {
        return Err(ModelError::InsufficientData { needed: 1, got: 0 });
    }
    let y = labels.col_vec(0);
    let mut saw = [false, false];
    for &v in &y {
        if v == F::zero() {
            saw[0] = true;
        } else if v == F::one() {
            saw[1] = true;
        } else {
            return Err(ModelError::InvalidLabel { value: v.to_f64() });
        }
    }
    if !(saw[0] && saw[1]) {
        return Err(ModelError::OneClassOnly);
    }

    let d = features.cols();
    let p = d + 1;
    let penalty = F::cast(PENALTY);
    let two = F::cast(2.0);
    let design = |i: usize, j: usize| -> F {
        if j < d {
            features.get(i, j)
        } else {
            F::one()
        }
    };

    let mut beta = vec![F::zero(); p];
    let mut logits = vec![F::zero(); n];
    let mut value = objective(&logits, &y, &beta, penalty);

    for _ in 0..MAX_NEWTON {
        let probs: Vec<F> = logits.iter().map(|&t| sigmoid(t)).collect();

        let mut grad = vec![F::zero(); p];
        for j in 0..p {
            let mut g = two * penalty * beta[j];
            for i in 0..n {
                g += design(i, j) * (probs[i] - y[i]);
            }
            grad[j] = g;
        }
        let grad_norm = grad
            .iter()
            .fold(F::zero(), |acc, &g| acc.max(g.abs()));
        if grad_norm < F::cast(GRAD_TOL) {
            break;
        }

        let mut hessian = Matrix::zeros(p, p);
        for i in 0..n {
            let w = probs[i] * (F::one() - probs[i]);
            if w == F::zero() {
                continue;
            }
            for a in 0..p {
                let wa = w * design(i, a);
                for b in a..p {
                    hessian.set(a, b, hessian.get(a, b) + wa * design(i, b));
                }
            }
        }
        for a in 0..p {
            hessian.set(a, a, hessian.get(a, a) + two * penalty);
            for b in 0..a {
                hessian.set(a, b, hessian.get(b, a));
            }
        }

        let direction = solve_spd(&hessian, &grad).map_err(|_| ModelError::SingularSystem {
            context: "logistic Newton step",
        })?;

        let mut step = F::one();
        let mut accepted = false;
        for _ in 0..MAX_HALVINGS {
            let candidate: Vec<F> = beta
                .iter()
                .zip(&direction)
                .map(|(&b, &s)| b - step * s)
                .collect();
            let cand_logits: Vec<F> = (0..n)
                .map(|i| {
                    let mut t = candidate[d];
                    for j in 0..d {
                        t += candidate[j] * features.get(i, j);
                    }
                    t
                })
                .collect();
            let cand_value = objective(&cand_logits, &y, &candidate, penalty);
            if cand_value <= value {
                beta = candidate;
                logits = cand_logits;
                value = cand_value;
                accepted = true;
                break;
            }
            step = step / two;
        }
        if !accepted {
            // The quadratic model stopped improving the objective at any
            // step length: we are at numerical optimum.
            break;
        }
    }

    let final_probs: Vec<F> = logits.iter().map(|&t| sigmoid(t)).collect();
    let mut grad_norm = F::zero();
    for j in 0..p {
        let mut g = two * penalty * beta[j];
        for (i, &pi) in final_probs.iter().enumerate() {
            g += design(i, j) * (pi - y[i]);
        }
        grad_norm = grad_norm.max(g.abs());
    }
    if grad_norm >= F::cast(GRAD_TOL) {
        return Err(ModelError::NonConvergence {
            what: "logistic Newton iterations",
            iterations: MAX_NEWTON,
        });
    }

    let weights = Matrix::new(1, d, beta[..d].to_vec()).expect("weights sized to d");
    Ok(LogisticModel {
        linear: LinearModel::new(weights, vec![beta[d]]),
    })
}

/// Factory for [`fit_logistic`].
#[derive(Debug, Clone, Copy, Default)]
pub struct LogisticFactory;

impl<F: Float> ModelFactory<F> for LogisticFactory {
    fn fit(
        &self,
        features: &Matrix<F>,
        targets: &Matrix<F>,
    ) -> Result<BoxedPredictor<F>, ModelError> {
        Ok(Box::new(fit_logistic(features, targets)?))
    }
}
