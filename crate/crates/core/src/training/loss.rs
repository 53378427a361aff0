use serde::{Deserialize, Serialize};

use crate::numerics::Real;

/// Probability clamp for binary cross-entropy.
pub const BCE_EPSILON: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Mse,
    Bce,
}

impl LossKind {
    pub fn eval<T: Real>(self, target: T, prediction: T) -> (T, T) {
        match self {
            LossKind::Mse => loss_mse(target, prediction),
            LossKind::Bce => loss_bce(target, prediction),
        }
    }
}

/// `(y - ŷ)²` and its derivative in `ŷ`.
pub fn loss_mse<T: Real>(target: T, prediction: T) -> (T, T) {
    let diff = prediction - target;
    (diff * diff, T::lit(2.0) * diff)
}

/// `-(y ln ŷ + (1 - y) ln(1 - ŷ))` with `ŷ` clamped to `[ε, 1 - ε]`.
pub fn loss_bce<T: Real>(target: T, prediction: T) -> (T, T) {
    let eps = T::lit(BCE_EPSILON);
    let one = T::one();
    let p = prediction.max(eps).min(one - eps);
    let value = -(target * p.ln() + (one - target) * (one - p).ln());
    let grad = (p - target) / (p * (one - p));
    (value, grad)
}
