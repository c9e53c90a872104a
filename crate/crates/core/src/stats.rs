//! Shared statistical primitives: normal CDF/quantile, the test-statistic
//! moment pair, Spearman correlation, and permutation p-values.

use crate::float::Float;
use crate::matrix::DimensionMismatch;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatError {
    #[error("argument outside domain for {what}: {value}")]
    DomainError { what: &'static str, value: f64 },
    #[error("need at least {needed} observations, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error(transparent)]
    Dimension(#[from] DimensionMismatch),
}

/// Standard normal CDF.
///
/// Computed through the complementary error function: a nonnegative power
/// series below |x| = 3·√2 and a continued fraction in the tail, so there
/// is no cancellation in either branch. Absolute error is below 1e-14 in
/// `f64`. Deep tails underflow to zero rather than erroring.
pub fn std_normal_cdf<F: Float>(x: F) -> F {
    let half = F::cast(0.5);
    let arg = -x / F::cast(core::f64::consts::SQRT_2);
    half * erfc(arg)
}

/// Complementary error function, accurate to ~1e-15 absolute in `f64`.
pub fn erfc<F: Float>(x: F) -> F {
    if x < F::zero() {
        return F::cast(2.0) - erfc(-x);
    }
    if x > F::cast(3.0) {
        erfc_tail_cf(x)
    } else {
        F::one() - erf_series(x)
    }
}

/// erf on [0, 3] via the all-positive-terms series
/// erf(x) = (2x e^{-x²}/√π) Σ_{n≥0} (2x²)^n / (1·3···(2n+1)).
fn erf_series<F: Float>(x: F) -> F {
    if x == F::zero() {
        return F::zero();
    }
    let two_x2 = F::cast(2.0) * x * x;
    let mut term = F::one();
    let mut sum = F::one();
    let mut odd = F::one();
    for _ in 0..200 {
        odd += F::cast(2.0);
        term *= two_x2 / odd;
        sum += term;
        if term < sum * F::cast(1e-20) {
            break;
        }
    }
    let root_pi = F::cast(core::f64::consts::PI).sqrt();
    F::cast(2.0) * x * (-x * x).exp() / root_pi * sum
}

/// erfc for x > 3 via the Laplace continued fraction
/// erfc(x) = e^{-x²}/√π · 1/(x + (1/2)/(x + 1/(x + (3/2)/(x + ...)))),
/// evaluated backward with a fixed depth that over-converges at x = 3.
fn erfc_tail_cf<F: Float>(x: F) -> F {
    let mut f = x;
    let mut k = 60;
    while k > 0 {
        f = x + F::cast(k as f64 / 2.0) / f;
        k -= 1;
    }
    let root_pi = F::cast(core::f64::consts::PI).sqrt();
    (-x * x).exp() / (root_pi * f)
}

/// Standard normal quantile on the open interval (0, 1).
///
/// Bisection against [`std_normal_cdf`]; the returned x satisfies
/// |Φ(x) − q| ≤ 1e-9 (far tighter in practice for `f64`).
pub fn std_normal_quantile<F: Float>(q: F) -> Result<F, StatError> {
    if !(q > F::zero() && q < F::one()) {
        return Err(StatError::DomainError { what: "std_normal_quantile probability", value: q.to_f64() });
    }
    let mut lo = F::cast(-45.0);
    let mut hi = F::cast(45.0);
    for _ in 0..200 {
        let mid = (lo + hi) * F::cast(0.5);
        if std_normal_cdf(mid) < q {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= F::epsilon() * hi.abs().max(lo.abs()).max(F::one()) {
            break;
        }
    }
    Ok((lo + hi) * F::cast(0.5))
}

/// Sample mean and the population-style scale estimate
/// σ̂ = sqrt(mean(T²) − mean(T)²) used by every regression-based test
/// statistic in this crate.
///
/// Computed as sqrt(mean((T−T̄)²)), which is the same quantity without
/// the cancellation; radicands above −1e-12 that dip negative through
/// rounding are clamped to zero.
pub fn mean_and_sigma_hat<F: Float>(values: &[F]) -> Result<(F, F), StatError> {
    let n = values.len();
    if n < 2 {
        return Err(StatError::InsufficientData { needed: 2, got: n });
    }
    for &v in values {
        if !v.is_finite() {
            return Err(StatError::DomainError { what: "mean_and_sigma_hat value", value: v.to_f64() });
        }
    }
    let n_f = F::cast(n);
    let mean = values.iter().copied().sum::<F>() / n_f;
    let mut ss = F::zero();
    for &v in values {
        let d = v - mean;
        ss += d * d;
    }
    let mut radicand = ss / n_f;
    if radicand < F::zero() {
        debug_assert!(radicand >= F::cast(-1e-12), "variance radicand {radicand:?}");
        radicand = F::zero();
    }
    Ok((mean, radicand.sqrt()))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman_rho<F: Float>(u: &[F], v: &[F]) -> Result<F, StatError> {
    if u.len() != v.len() {
        return Err(DimensionMismatch { context: "spearman inputs", expected: u.len(), got: v.len() }.into());
    }
    let n = u.len();
    if n < 2 {
        return Err(StatError::InsufficientData { needed: 2, got: n });
    }
    for &a in u.iter().chain(v.iter()) {
        if !a.is_finite() {
            return Err(StatError::DomainError { what: "spearman value", value: a.to_f64() });
        }
    }
    let ru = average_ranks(u);
    let rv = average_ranks(v);
    pearson(&ru, &rv)
}

/// Average (midrank) ranks, 1-based.
pub fn average_ranks<F: Float>(values: &[F]) -> Vec<F> {
    let n = values.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).expect("no NaN after validation"));
    let mut ranks = vec![F::zero(); n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        // ranks i+1 ..= j+1 share the average rank
        let avg = F::cast((i + j) as f64 / 2.0 + 1.0);
        for k in i..=j {
            ranks[order[k]] = avg;
        }
        i = j + 1;
    }
    ranks
}

fn pearson<F: Float>(a: &[F], b: &[F]) -> Result<F, StatError> {
    let n_f = F::cast(a.len());
    let ma = a.iter().copied().sum::<F>() / n_f;
    let mb = b.iter().copied().sum::<F>() / n_f;
    let mut num = F::zero();
    let mut da = F::zero();
    let mut db = F::zero();
    for (&x, &y) in a.iter().zip(b) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    if da == F::zero() || db == F::zero() {
        return Err(StatError::DegenerateInput("constant input has no rank correlation"));
    }
    Ok(num / (da * db).sqrt())
}

/// Permutation p-value with the add-one convention:
/// p = (1 + #{b : resample_b ≥ observed}) / (1 + B).
pub fn permutation_pvalue<F: Float>(observed: F, resamples: &[F]) -> F {
    let exceed = resamples.iter().filter(|&&r| r >= observed).count();
    F::cast(1 + exceed) / F::cast(1 + resamples.len())
}

/// p = 1 − Φ(λ) for upper-tailed statistics.
pub fn one_sided_pvalue<F: Float>(lambda: F) -> F {
    (F::one() - std_normal_cdf(lambda)).max(F::zero()).min(F::one())
}

/// p = 2(1 − Φ(|γ|)) for two-tailed statistics, clamped to [0, 1].
pub fn two_sided_pvalue<F: Float>(gamma: F) -> F {
    (F::cast(2.0) * (F::one() - std_normal_cdf(gamma.abs()))).max(F::zero()).min(F::one())
}

/// Which conditional-independence test produced an outcome.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Stfr,
    Gcm,
    Resit,
    Rbpt,
    Rbpt2,
    Crt,
}

impl Method {
    pub const ALL: [Method; 6] = [
        Method::Stfr,
        Method::Gcm,
        Method::Resit,
        Method::Rbpt,
        Method::Rbpt2,
        Method::Crt,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Stfr => "stfr",
            Method::Gcm => "gcm",
            Method::Resit => "resit",
            Method::Rbpt => "rbpt",
            Method::Rbpt2 => "rbpt2",
            Method::Crt => "crt",
        }
    }

    pub fn parse(name: &str) -> Option<Method> {
        Method::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// Result of running one conditional-independence test.
///
/// For the normal-approximation tests, `statistic` is √n·t̄/σ̂ (its
/// absolute value for two-sided GCM) and the p-value is recomputable from
/// the recorded pieces. For permutation-based tests (RESIT, CRT) the
/// p-value comes from resampling counts instead and `sigma_hat` may be 0.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct TestOutcome<F> {
    pub method: Method,
    pub statistic: F,
    pub p_value: F,
    pub t_bar: F,
    pub sigma_hat: F,
    pub n_test: usize,
}
