//! L1-penalized least squares fit by cyclic coordinate descent.

use crate::float::Float;
use crate::matrix::{DimensionMismatch, Matrix};
use crate::rng::{fisher_yates, RngStream};

use super::{check_same_rows, BoxedPredictor, LinearModel, ModelError, ModelFactory, Standardizer};

const TOL: f64 = 1e-10;
const MAX_SWEEPS: usize = 10_000;
const GRID_DECAY: f64 = 1e-3;

/// Penalty selection for [`fit_lasso`].
#[derive(Debug, Clone, Copy)]
pub enum LassoLambda<F> {
    /// Use this λ as given.
    Fixed(F),
    /// Pick λ by k-fold cross-validation over a geometric grid from
    /// λ_max (the smallest λ with an all-zero solution) down to
    /// 1e-3·λ_max, minimizing held-out squared error. Ties prefer the
    /// larger λ.
    CrossValidated {
        folds: usize,
        grid_size: usize,
        stream: RngStream,
    },
}

impl<F> LassoLambda<F> {
    /// Cross-validation with the standard 5 folds and a 50-point grid.
    pub fn cross_validated(stream: RngStream) -> Self {
        Self::CrossValidated {
            folds: 5,
            grid_size: 50,
            stream,
        }
    }
}

/// The training design after standardization, held column-major so
/// coordinate sweeps touch contiguous memory.
struct CdDesign<F> {
    cols: Vec<Vec<F>>,
    /// Mean square of each column; zero marks a constant column that
    /// coordinate descent must skip.
    col_sq: Vec<F>,
    n: usize,
}

impl<F: Float> CdDesign<F> {
    fn from_standardized(x: &Matrix<F>) -> Self {
        let n = x.rows();
        let d = x.cols();
        let inv_n = F::one() / F::cast(n);
        let mut cols = Vec::with_capacity(d);
        let mut col_sq = Vec::with_capacity(d);
        for j in 0..d {
            let col = x.col_vec(j);
            col_sq.push(col.iter().map(|&v| v * v).sum::<F>() * inv_n);
            cols.push(col);
        }
        Self { cols, col_sq, n }
    }

    fn lambda_max(&self, y: &[F]) -> F {
        let inv_n = F::one() / F::cast(self.n);
        let mut best = F::zero();
        for col in &self.cols {
            let dot = col.iter().zip(y).map(|(&a, &b)| a * b).sum::<F>() * inv_n;
            if dot.abs() > best {
                best = dot.abs();
            }
        }
        best
    }
}

fn soft_threshold<F: Float>(value: F, lambda: F) -> F {
    if value > lambda {
        value - lambda
    } else if value < -lambda {
        value + lambda
    } else {
        F::zero()
    }
}

/// One coordinate sweep; returns the largest squared coefficient change
/// weighted by the column's mean square, the scale-free progress measure
/// the convergence check compares against the target's variance.
fn sweep<F: Float>(
    design: &CdDesign<F>,
    lambda: F,
    beta: &mut [F],
    resid: &mut [F],
    active_only: bool,
) -> F {
    let inv_n = F::one() / F::cast(design.n);
    let mut max_change = F::zero();
    for j in 0..beta.len() {
        if design.col_sq[j] == F::zero() || (active_only && beta[j] == F::zero()) {
            continue;
        }
        let col = &design.cols[j];
        let mut dot = F::zero();
        for (c, r) in col.iter().zip(resid.iter()) {
            dot += *c * *r;
        }
        let rho = dot * inv_n + beta[j] * design.col_sq[j];
        let updated = soft_threshold(rho, lambda) / design.col_sq[j];
        let delta = updated - beta[j];
        if delta != F::zero() {
            for (c, r) in col.iter().zip(resid.iter_mut()) {
                *r -= *c * delta;
            }
            beta[j] = updated;
            let change = design.col_sq[j] * delta * delta;
            if change > max_change {
                max_change = change;
            }
        }
    }
    max_change
}

/// Runs coordinate descent at one λ, warm-starting from `beta`.
///
/// Full sweeps alternate with sweeps restricted to the active set, the
/// standard pathwise speedup.  `tol` is an absolute threshold on the
/// weighted squared coefficient change reported by [`sweep`]; callers
/// scale it by the target's variance so the check is invariant to the
/// units of both sides of the regression.  Convergence is declared only
/// after a full sweep stays at or under the threshold.
fn descend<F: Float>(
    design: &CdDesign<F>,
    lambda: F,
    beta: &mut [F],
    resid: &mut [F],
    sweeps_used: &mut usize,
    tol: F,
) -> Result<(), ModelError> {
    loop {
        *sweeps_used += 1;
        if *sweeps_used > MAX_SWEEPS {
            return Err(ModelError::NonConvergence {
                what: "lasso coordinate descent",
                iterations: MAX_SWEEPS,
            });
        }
        if sweep(design, lambda, beta, resid, false) <= tol {
            return Ok(());
        }
        loop {
            *sweeps_used += 1;
            if *sweeps_used > MAX_SWEEPS {
                return Err(ModelError::NonConvergence {
                    what: "lasso coordinate descent",
                    iterations: MAX_SWEEPS,
                });
            }
            if sweep(design, lambda, beta, resid, true) <= tol {
                break;
            }
        }
    }
}

/// Geometric grid of `size` penalties from `lambda_max` down to
/// `GRID_DECAY`·`lambda_max`, largest first.
fn lambda_grid<F: Float>(lambda_max: F, size: usize) -> Vec<F> {
    if lambda_max <= F::zero() || size <= 1 {
        return vec![lambda_max.max(F::zero())];
    }
    let ratio = F::cast(GRID_DECAY).powf(F::one() / F::cast(size - 1));
    let mut grid = Vec::with_capacity(size);
    let mut lambda = lambda_max;
    for _ in 0..size {
        grid.push(lambda);
        lambda *= ratio;
    }
    grid
}

struct StandardizedProblem<F> {
    design: CdDesign<F>,
    y_centered: Vec<F>,
    y_mean: F,
    standardizer: Standardizer<F>,
}

impl<F: Float> StandardizedProblem<F> {
    /// Convergence threshold for [`descend`], scaled to the centered
    /// target's variance so a constant target converges immediately.
    fn tolerance(&self) -> F {
        let n = F::cast(self.y_centered.len());
        let variance = self.y_centered.iter().map(|&v| v * v).sum::<F>() / n;
        F::cast(TOL) * variance
    }
}

fn standardize_problem<F: Float>(features: &Matrix<F>, targets: &[F]) -> StandardizedProblem<F> {
    let standardizer = Standardizer::fit(features);
    let x_std = standardizer.transform(features);
    let y_mean = targets.iter().copied().sum::<F>() / F::cast(targets.len());
    let y_centered = targets.iter().map(|&v| v - y_mean).collect();
    StandardizedProblem {
        design: CdDesign::from_standardized(&x_std),
        y_centered,
        y_mean,
        standardizer,
    }
}

/// Assembles the model on the original feature scale from standardized
/// coefficients.
fn assemble_model<F: Float>(problem: &StandardizedProblem<F>, beta_std: &[F]) -> LinearModel<F> {
    let d = beta_std.len();
    let mut weights = Vec::with_capacity(d);
    let mut intercept = problem.y_mean;
    for j in 0..d {
        let raw = beta_std[j] / problem.standardizer.scale[j];
        intercept -= raw * problem.standardizer.mean[j];
        weights.push(raw);
    }
    LinearModel::new(
        Matrix::new(1, d, weights).expect("weight row is sized to d"),
        vec![intercept],
    )
}

/// Fits an L1-penalized linear model of a scalar target.
///
/// Features are standardized internally and the coefficients returned on
/// the original scale; the penalized objective is
/// (1/2n)‖y − β₀ − Xβ‖² + λ‖β‖₁.
pub fn fit_lasso<F: Float>(
    features: &Matrix<F>,
    targets: &Matrix<F>,
    lambda: LassoLambda<F>,
) -> Result<LinearModel<F>, ModelError> {
    check_same_rows(features, targets)?;
    if targets.cols() != 1 {
        return Err(DimensionMismatch {
            context: "lasso target columns",
            expected: 1,
            got: targets.cols(),
        }
        .into());
    }
    let n = features.rows();
    if n < 2 {
        return Err(ModelError::InsufficientData { needed: 2, got: n });
    }
    let y = targets.col_vec(0);

    match lambda {
        LassoLambda::Fixed(value) => {
            let problem = standardize_problem(features, &y);
            let mut beta = vec![F::zero(); features.cols()];
            let mut resid = problem.y_centered.clone();
            let mut sweeps = 0;
            descend(
                &problem.design,
                value,
                &mut beta,
                &mut resid,
                &mut sweeps,
                problem.tolerance(),
            )?;
            Ok(assemble_model(&problem, &beta))
        }
        LassoLambda::CrossValidated {
            folds,
            grid_size,
            stream,
        } => {
            if n < folds {
                return Err(ModelError::InsufficientData {
                    needed: folds,
                    got: n,
                });
            }
            let problem = standardize_problem(features, &y);
            let grid = lambda_grid(problem.design.lambda_max(&problem.y_centered), grid_size);

            let mut order: Vec<usize> = (0..n).collect();
            fisher_yates(&mut order, &mut stream.rng());

            let mut cv_sse = vec![F::zero(); grid.len()];
            for fold in 0..folds {
                let lo = fold * n / folds;
                let hi = (fold + 1) * n / folds;
                let val_idx = &order[lo..hi];
                let train_idx: Vec<usize> = order[..lo]
                    .iter()
                    .chain(&order[hi..])
                    .copied()
                    .collect();

                let x_train = features.take_rows(&train_idx);
                let y_train: Vec<F> = train_idx.iter().map(|&i| y[i]).collect();
                let fold_problem = standardize_problem(&x_train, &y_train);
                let fold_tol = fold_problem.tolerance();

                let mut beta = vec![F::zero(); features.cols()];
                let mut std_row = Vec::new();
                for (gi, &lam) in grid.iter().enumerate() {
                    let mut resid = fold_problem.y_centered.clone();
                    for (j, col) in fold_problem.design.cols.iter().enumerate() {
                        if beta[j] != F::zero() {
                            for (c, r) in col.iter().zip(resid.iter_mut()) {
                                *r -= *c * beta[j];
                            }
                        }
                    }
                    let mut sweeps = 0;
                    descend(
                        &fold_problem.design,
                        lam,
                        &mut beta,
                        &mut resid,
                        &mut sweeps,
                        fold_tol,
                    )?;
                    for &i in val_idx {
                        fold_problem
                            .standardizer
                            .transform_row(features.row(i), &mut std_row);
                        let mut pred = fold_problem.y_mean;
                        for (b, v) in beta.iter().zip(&std_row) {
                            pred += *b * *v;
                        }
                        let err = y[i] - pred;
                        cv_sse[gi] += err * err;
                    }
                }
            }

            let mut best = 0;
            for gi in 1..grid.len() {
                if cv_sse[gi] < cv_sse[best] {
                    best = gi;
                }
            }

            let tol = problem.tolerance();
            let mut beta = vec![F::zero(); features.cols()];
            for &lam in &grid[..=best] {
                let mut resid = problem.y_centered.clone();
                for (j, col) in problem.design.cols.iter().enumerate() {
                    if beta[j] != F::zero() {
                        for (c, r) in col.iter().zip(resid.iter_mut()) {
                            *r -= *c * beta[j];
                        }
                    }
                }
                let mut sweeps = 0;
                descend(&problem.design, lam, &mut beta, &mut resid, &mut sweeps, tol)?;
            }
            Ok(assemble_model(&problem, &beta))
        }
    }
}

/// Factory for [`fit_lasso`].
#[derive(Debug, Clone, Copy)]
pub struct LassoFactory<F> {
    pub lambda: LassoLambda<F>,
}

impl<F: Float> ModelFactory<F> for LassoFactory<F> {
    fn fit(
        &self,
        features: &Matrix<F>,
        targets: &Matrix<F>,
    ) -> Result<BoxedPredictor<F>, ModelError> {
        Ok(Box::new(fit_lasso(features, targets, self.lambda)?))
    }
}
