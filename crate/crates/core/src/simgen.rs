//! Synthetic data generators for calibration and power studies.
//!
//! Two families are provided: a low-dimensional quadratic design whose
//! conditional mean of `X` given `Z` is `(b'Z)^2` (with optional skewed
//! response noise and a direct `X -> Y` effect), and high-dimensional
//! linear designs where the interesting behaviour comes from regularized
//! fits rather than from the data itself.  [`semi_synthetic_null`] turns a
//! real dataset into an approximate null instance by shuffling responses
//! within quantile bins of a scalar conditioning variable.

use rand::Rng;

use crate::float::Float;
use crate::matrix::{Dataset, DimensionMismatch, Matrix};
use crate::rng::{fisher_yates, RngStream, StreamRng};

/// Failure modes of the dataset constructors.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    /// Quantile binning left a bin without any rows, usually because the
    /// conditioning variable is dominated by a few repeated values.
    #[error("quantile bin {bin} of {n_bins} received no rows; z has too many ties")]
    EmptyBin { bin: usize, n_bins: usize },
    /// The operation only supports a particular column layout.
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Parameters of the quadratic design.
///
/// Data is drawn as `Z ~ N(0, I)`, `X | Z ~ N((b'Z)^2, 1)` and
/// `Y = c X + a'Z + gamma (b'Z)^2 + e`, where `e` has unit scale and
/// optional skewness.  `theta` is not used by the generator itself; it
/// travels with the parameters so that a study can shift the conditional
/// law handed to resampling-based tests away from the truth.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadraticDgpParams<F> {
    pub d_z: usize,
    /// Linear effect of `Z` on `Y`.
    pub a: Vec<F>,
    /// Direction defining the quadratic feature `(b'Z)^2`.
    pub b: Vec<F>,
    /// Direct effect of `X` on `Y`; zero under the null.
    pub c: F,
    /// Weight of the quadratic term in the response mean.
    pub gamma: F,
    /// Shape of the skew-normal response noise; zero means Gaussian.
    pub skew_shape: F,
    /// Mean shift applied to the modelled conditional law of `X` given `Z`.
    pub theta: F,
}

impl<F: Float> QuadraticDgpParams<F> {
    /// Conditional mean of `X` given a single row of `Z`.
    pub fn x_mean(&self, z_row: &[F]) -> F {
        let bz = dot(&self.b, z_row);
        bz * bz
    }

    /// Mean of the response given `x` and a row of `Z`.
    pub fn y_location(&self, x: F, z_row: &[F]) -> F {
        let bz = dot(&self.b, z_row);
        self.c * x + dot(&self.a, z_row) + self.gamma * bz * bz
    }
}

/// Draws `a` and `b` as independent standard normal vectors of length
/// `d_z`, leaving every scalar knob (`c`, `gamma`, `skew_shape`, `theta`)
/// at zero so the result is a null-hypothesis configuration.
pub fn draw_generative_params<F: Float>(d_z: usize, stream: RngStream) -> QuadraticDgpParams<F> {
    let mut rng = stream.rng();
    let a = (0..d_z).map(|_| F::standard_normal(&mut rng)).collect();
    let b = (0..d_z).map(|_| F::standard_normal(&mut rng)).collect();
    QuadraticDgpParams {
        d_z,
        a,
        b,
        c: F::zero(),
        gamma: F::zero(),
        skew_shape: F::zero(),
        theta: F::zero(),
    }
}

/// Samples `n` rows from the quadratic design.
///
/// The response noise has unit scale and skew-normal shape
/// `params.skew_shape`; a shape of zero reproduces `N(0, 1)` exactly.
pub fn gen_quadratic<F: Float>(
    params: &QuadraticDgpParams<F>,
    n: usize,
    stream: RngStream,
) -> Dataset<F> {
    assert_eq!(params.a.len(), params.d_z, "a must have length d_z");
    assert_eq!(params.b.len(), params.d_z, "b must have length d_z");
    let mut rng = stream.rng();
    let mut z = Matrix::zeros(n, params.d_z);
    let mut x = Matrix::zeros(n, 1);
    let mut y = Matrix::zeros(n, 1);
    let mut z_row = vec![F::zero(); params.d_z];
    for i in 0..n {
        for v in z_row.iter_mut() {
            *v = F::standard_normal(&mut rng);
        }
        z.row_mut(i).copy_from_slice(&z_row);
        let xi = params.x_mean(&z_row) + F::standard_normal(&mut rng);
        x.set(i, 0, xi);
        let noise = skew_normal_draw(params.skew_shape, &mut rng);
        y.set(i, 0, params.y_location(xi, &z_row) + noise);
    }
    Dataset::new(x, y, z).expect("generated blocks share a row count")
}

/// One draw from the standardized skew-normal family with unit scale.
///
/// Uses the representation `delta |U0| + sqrt(1 - delta^2) U1` with
/// independent standard normals, where `delta = shape / sqrt(1 + shape^2)`.
/// A shape of zero short-circuits to a single normal draw, so null
/// configurations consume one fewer variate and stay exactly Gaussian.
fn skew_normal_draw<F: Float, R: Rng + ?Sized>(shape: F, rng: &mut R) -> F {
    if shape == F::zero() {
        return F::standard_normal(rng);
    }
    let delta = shape / (F::one() + shape * shape).sqrt();
    let u0: F = F::standard_normal(rng);
    let u1: F = F::standard_normal(rng);
    delta * u0.abs() + (F::one() - delta * delta).sqrt() * u1
}

/// Which high-dimensional linear design to draw.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HighDimVariant {
    /// `X` and `Y` load on disjoint sparse blocks of `Z`: `X` on the first
    /// `sparsity` coordinates, `Y` on the last `sparsity`.
    GcmToy,
    /// `X` and `Y` share one sparse coefficient vector on the leading
    /// coordinates, so their conditional means coincide.
    StfrToy,
}

/// Parameters of the high-dimensional linear designs.
#[derive(Debug, Clone, PartialEq)]
pub struct HighDimDgpParams<F> {
    pub variant: HighDimVariant,
    /// Rows per generated dataset.
    pub n: usize,
    /// Dimension of `Z`.
    pub d: usize,
    /// Value given to each active coefficient.
    pub signal: F,
    /// Number of active coefficients per block.
    pub sparsity: usize,
}

impl<F: Float> HighDimDgpParams<F> {
    /// Disjoint-support design: 250 rows, 500 covariates, five active
    /// coefficients of size 20 in each block.
    pub fn gcm_toy() -> Self {
        HighDimDgpParams {
            variant: HighDimVariant::GcmToy,
            n: 250,
            d: 500,
            signal: F::cast(20),
            sparsity: 5,
        }
    }

    /// Shared-support design: 250 rows, 300 covariates, thirty active
    /// coefficients of size 1 common to both conditional means.
    pub fn stfr_toy() -> Self {
        HighDimDgpParams {
            variant: HighDimVariant::StfrToy,
            n: 250,
            d: 300,
            signal: F::one(),
            sparsity: 30,
        }
    }
}

/// Samples one dataset from a high-dimensional linear design.  Both
/// variants satisfy `X` independent of `Y` given `Z`, so every rejection
/// in a study built on them is a false positive.
pub fn gen_highdim<F: Float>(params: &HighDimDgpParams<F>, stream: RngStream) -> Dataset<F> {
    assert!(
        2 * params.sparsity <= params.d || params.variant == HighDimVariant::StfrToy,
        "disjoint blocks need 2 * sparsity <= d"
    );
    assert!(params.sparsity <= params.d, "sparsity cannot exceed d");
    let mut rng = stream.rng();
    let n = params.n;
    let d = params.d;
    let mut z = Matrix::zeros(n, d);
    let mut x = Matrix::zeros(n, 1);
    let mut y = Matrix::zeros(n, 1);
    for i in 0..n {
        for j in 0..d {
            z.set(i, j, F::standard_normal(&mut rng));
        }
        let row = z.row(i);
        let (x_mean, y_mean) = match params.variant {
            HighDimVariant::GcmToy => {
                let xm: F = row[..params.sparsity].iter().copied().sum();
                let ym: F = row[d - params.sparsity..].iter().copied().sum();
                (params.signal * xm, params.signal * ym)
            }
            HighDimVariant::StfrToy => {
                let m: F = row[..params.sparsity].iter().copied().sum();
                (params.signal * m, params.signal * m)
            }
        };
        x.set(i, 0, x_mean + F::standard_normal(&mut rng));
        y.set(i, 0, y_mean + F::standard_normal(&mut rng));
    }
    Dataset::new(x, y, z).expect("generated blocks share a row count")
}

/// Builds an approximate null instance from real data by discretizing a
/// scalar `Z` into `n_bins` equal-frequency bins and shuffling the rows of
/// `Y` within each bin.  `X` is left untouched and `Z` is replaced by the
/// bin index, so any dependence of `Y` on `X` beyond what the binned `Z`
/// explains is destroyed.
pub fn semi_synthetic_null<F: Float>(
    data: &Dataset<F>,
    n_bins: usize,
    stream: RngStream,
) -> Result<Dataset<F>, SimError> {
    if data.z().cols() != 1 {
        return Err(DimensionMismatch {
            context: "binned conditioning variable",
            expected: 1,
            got: data.z().cols(),
        }
        .into());
    }
    assert!(n_bins >= 1, "need at least one bin");
    let n = data.n_rows();
    let z = data.z().col_vec(0);

    let mut sorted = z.clone();
    sorted.sort_by(|p, q| p.partial_cmp(q).expect("non-finite conditioning value"));
    // Upper edge of bin k is the largest value in the k-th equal-frequency
    // block of the sorted sample; ties share a bin, which can starve later
    // bins and is reported rather than silently merged.
    let upper: Vec<F> = (0..n_bins)
        .map(|k| sorted[((k + 1) * n / n_bins).max(1) - 1])
        .collect();
    let bin_of = |v: F| -> usize {
        match upper.iter().position(|&u| v <= u) {
            Some(k) => k,
            None => n_bins - 1,
        }
    };

    let mut members: Vec<Vec<usize>> = vec![Vec::new(); n_bins];
    for (i, &v) in z.iter().enumerate() {
        members[bin_of(v)].push(i);
    }
    if let Some(bin) = members.iter().position(Vec::is_empty) {
        return Err(SimError::EmptyBin { bin, n_bins });
    }

    let mut rng: StreamRng = stream.rng();
    let mut new_y = data.y().clone();
    for rows in &members {
        let mut shuffled = rows.clone();
        fisher_yates(&mut shuffled, &mut rng);
        for (slot, &src) in rows.iter().zip(shuffled.iter()) {
            new_y.row_mut(*slot).copy_from_slice(data.y().row(src));
        }
    }

    let mut new_z = Matrix::zeros(n, 1);
    for (i, &v) in z.iter().enumerate() {
        new_z.set(i, 0, F::cast(bin_of(v)));
    }
    Ok(Dataset::new(data.x().clone(), new_y, new_z).expect("row count is preserved"))
}

fn dot<F: Float>(a: &[F], b: &[F]) -> F {
    assert_eq!(a.len(), b.len(), "dot product length mismatch");
    a.iter().zip(b).map(|(&p, &q)| p * q).sum()
}
