//! Kernel ridge regression with a polynomial kernel.

use crate::float::Float;
use crate::linalg::{cholesky_in_place, cholesky_solve};
use crate::matrix::Matrix;

use super::{check_same_rows, BoxedPredictor, ModelError, ModelFactory, Predictor, Standardizer};

/// A kernel ridge model in dual form: prediction is a weighted sum of
/// kernel evaluations against the stored training rows.
pub struct KrrModel<F> {
    standardizer: Standardizer<F>,
    /// Standardized training features, one row per kept sample.
    train: Matrix<F>,
    /// `n × output_dim` dual coefficients.
    alpha: Matrix<F>,
    degree: i32,
    /// Kernel normalizer: the feature dimension, floored at one.
    divisor: F,
}

impl<F: Float> KrrModel<F> {
    fn kernel(&self, u: &[F], v: &[F]) -> F {
        poly_kernel(u, v, self.degree, self.divisor)
    }

    /// Euclidean norm of the dual coefficient block, a measure of how far
    /// the fit is from the zero function.
    pub fn dual_norm(&self) -> F {
        self.alpha
            .data()
            .iter()
            .map(|&a| a * a)
            .sum::<F>()
            .sqrt()
    }
}

fn poly_kernel<F: Float>(u: &[F], v: &[F], degree: i32, divisor: F) -> F {
    let mut dot = F::zero();
    for (a, b) in u.iter().zip(v) {
        dot += *a * *b;
    }
    (F::one() + dot / divisor).powi(degree)
}

impl<F: Float> Predictor<F> for KrrModel<F> {
    fn input_dim(&self) -> usize {
        self.standardizer.mean.len()
    }

    fn output_dim(&self) -> usize {
        self.alpha.cols()
    }

    fn predict_into(&self, row: &[F], out: &mut [F]) {
        debug_assert_eq!(row.len(), self.input_dim());
        let mut std_row = Vec::with_capacity(row.len());
        self.standardizer.transform_row(row, &mut std_row);
        for slot in out.iter_mut() {
            *slot = F::zero();
        }
        for i in 0..self.train.rows() {
            let k = self.kernel(&std_row, self.train.row(i));
            for (slot, &a) in out.iter_mut().zip(self.alpha.row(i)) {
                *slot += k * a;
            }
        }
    }
}

/// Fits kernel ridge regression with the kernel
/// k(u, v) = (1 + uᵀv/d)^degree on standardized inputs.
///
/// The dual coefficients solve (K + ridge·n·I)α = Y, so `ridge` is on the
/// per-sample scale and comparable across training-set sizes.
pub fn fit_krr_poly<F: Float>(
    features: &Matrix<F>,
    targets: &Matrix<F>,
    degree: u32,
    ridge: F,
) -> Result<KrrModel<F>, ModelError> {
    check_same_rows(features, targets)?;
    let n = features.rows();
    if n == 0 {
        return Err(ModelError::InsufficientData { needed: 1, got: 0 });
    }
    assert!(ridge > F::zero(), "ridge must be positive");
    let degree = degree as i32;
    let divisor = F::cast(features.cols().max(1));

    let standardizer = Standardizer::fit(features);
    let train = standardizer.transform(features);

    let mut system = Matrix::from_fn(n, n, |i, j| {
        poly_kernel(train.row(i), train.row(j), degree, divisor)
    });
    let reg = ridge * F::cast(n);
    for i in 0..n {
        system.set(i, i, system.get(i, i) + reg);
    }
    cholesky_in_place(&mut system).map_err(|_| ModelError::SingularSystem {
        context: "regularized kernel matrix",
    })?;

    let k_out = targets.cols();
    let mut alpha = Matrix::zeros(n, k_out);
    for out in 0..k_out {
        let solved = cholesky_solve(&system, &targets.col_vec(out));
        for (i, v) in solved.into_iter().enumerate() {
            alpha.set(i, out, v);
        }
    }

    Ok(KrrModel {
        standardizer,
        train,
        alpha,
        degree,
        divisor,
    })
}

/// Factory for [`fit_krr_poly`].
#[derive(Debug, Clone, Copy)]
pub struct KrrFactory<F> {
    pub degree: u32,
    pub ridge: F,
}

impl<F: Float> Default for KrrFactory<F> {
    fn default() -> Self {
        Self {
            degree: 3,
            ridge: F::cast(1e-3),
        }
    }
}

impl<F: Float> ModelFactory<F> for KrrFactory<F> {
    fn fit(
        &self,
        features: &Matrix<F>,
        targets: &Matrix<F>,
    ) -> Result<BoxedPredictor<F>, ModelError> {
        Ok(Box::new(fit_krr_poly(
            features,
            targets,
            self.degree,
            self.ridge,
        )?))
    }
}
