//! Scalar abstraction used throughout the crate.
//!
//! Everything numeric is generic over [`Float`] so the same code runs in
//! `f32` or `f64`. The accuracy guarantees documented on individual
//! functions (normal CDF error bounds, solver tolerances, ...) are stated
//! for `f64`; `f32` instantiations are limited by its 24-bit mantissa.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// Floating-point scalar usable by the estimators and tests in this crate.
pub trait Float:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + core::iter::Sum<Self>
    + core::fmt::Debug
    + core::fmt::Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Converts from any primitive, saturating on overflow. Intended for
    /// literals and counters, e.g. `F::cast(0.5)` or `F::cast(n)`.
    fn cast<T: num_traits::ToPrimitive>(value: T) -> Self;

    /// Widens to `f64` (identity for `f64`).
    fn to_f64(self) -> f64;

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// One draw from U[0, 1).
    fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self;
}

macro_rules! impl_float {
    ($t:ty) => {
        impl Float for $t {
            fn cast<T: num_traits::ToPrimitive>(value: T) -> Self {
                value.to_f64().map(|v| v as $t).unwrap_or_else(|| {
                    // Only u128/i128 edge cases land here; saturate.
                    <$t>::MAX
                })
            }

            fn to_f64(self) -> f64 {
                self as f64
            }

            fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
                StandardNormal.sample(rng)
            }

            fn uniform<R: Rng + ?Sized>(rng: &mut R) -> Self {
                rng.random()
            }
        }
    };
}

impl_float!(f32);
impl_float!(f64);

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cast_roundtrips_literals() {
        assert_eq!(<f64 as Float>::cast(0.25_f64), 0.25);
        assert_eq!(<f32 as Float>::cast(3_usize), 3.0);
        assert_eq!(<f64 as Float>::cast(-7_i32), -7.0);
    }

    #[test]
    fn normal_draws_have_sane_moments() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 20_000;
        let mut sum = 0.0f64;
        let mut sumsq = 0.0f64;
        for _ in 0..n {
            let x = f64::standard_normal(&mut rng);
            sum += x;
            sumsq += x * x;
        }
        let mean = sum / n as f64;
        let var = sumsq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.03, "mean {mean}");
        assert!((var - 1.0).abs() < 0.05, "var {var}");
    }
}
