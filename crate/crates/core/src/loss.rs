//! Loss functions used to score fitted predictors on held-out rows.

use std::fmt;

use crate::float::Float;

/// A pointwise loss `l(prediction, target)`.
///
/// Both members are convex in the prediction argument, which the
/// loss-comparison tests rely on; only the squared loss is strictly so.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossFunction {
    /// `(prediction - target)^2`.
    SquaredL2,
    /// `|prediction - target|`.
    AbsoluteL1,
}

impl LossFunction {
    /// Scores a scalar prediction against a scalar target.
    pub fn evaluate<F: Float>(self, prediction: F, target: F) -> F {
        let gap = prediction - target;
        match self {
            LossFunction::SquaredL2 => gap * gap,
            LossFunction::AbsoluteL1 => gap.abs(),
        }
    }

    /// Scores a vector prediction coordinate-wise and sums the parts.
    ///
    /// # Panics
    /// If the slices have different lengths.
    pub fn evaluate_vec<F: Float>(self, prediction: &[F], target: &[F]) -> F {
        assert_eq!(
            prediction.len(),
            target.len(),
            "prediction and target must have the same width"
        );
        prediction
            .iter()
            .zip(target)
            .map(|(&p, &t)| self.evaluate(p, t))
            .sum()
    }

    /// Every member of this family is convex in the prediction.
    pub fn convex(self) -> bool {
        true
    }

    /// Whether the loss is strictly convex in the prediction.
    pub fn strictly_convex(self) -> bool {
        matches!(self, LossFunction::SquaredL2)
    }

    /// A Lipschitz constant in the prediction argument, valid whenever
    /// `|prediction - target| <= radius`.
    pub fn lipschitz_const<F: Float>(self, radius: F) -> F {
        assert!(radius >= F::zero(), "radius must be nonnegative");
        match self {
            LossFunction::SquaredL2 => F::cast(2) * radius,
            LossFunction::AbsoluteL1 => F::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossFunction::SquaredL2 => "squared",
            LossFunction::AbsoluteL1 => "absolute",
        }
    }

    /// Parses the names produced by [`LossFunction::name`], plus the
    /// common shorthands `l2` and `l1`.
    pub fn parse(name: &str) -> Option<LossFunction> {
        match name.trim().to_ascii_lowercase().as_str() {
            "squared" | "l2" => Some(LossFunction::SquaredL2),
            "absolute" | "l1" => Some(LossFunction::AbsoluteL1),
            _ => None,
        }
    }
}

impl fmt::Display for LossFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}
