use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::Real;

const SELU_ALPHA: f64 = 1.673_263_242_354_377_3;
const SELU_LAMBDA: f64 = 1.050_700_987_355_480_5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Identity,
    Relu,
    Selu,
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.max(T::zero()),
            Activation::Selu => {
                let lambda = T::lit(SELU_LAMBDA);
                if x > T::zero() {
                    lambda * x
                } else {
                    lambda * T::lit(SELU_ALPHA) * x.exp_m1()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => {
                if x >= T::zero() {
                    T::one() / (T::one() + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (T::one() + e)
                }
            }
        }
    }

    /// Derivative with respect to the pre-activation. The relu kink at 0 has
    /// derivative 0.
    #[inline]
    pub fn derivative<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => T::one(),
            Activation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Selu => {
                let lambda = T::lit(SELU_LAMBDA);
                if x > T::zero() {
                    lambda
                } else {
                    lambda * T::lit(SELU_ALPHA) * x.exp()
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                T::one() - t * t
            }
            Activation::Sigmoid => {
                let s = self.apply(x);
                s * (T::one() - s)
            }
        }
    }

    pub fn apply_slice<T: Real>(self, pre: &[T]) -> Vec<T> {
        pre.iter().map(|&x| self.apply(x)).collect()
    }

    pub fn derivative_slice<T: Real>(self, pre: &[T]) -> Vec<T> {
        pre.iter().map(|&x| self.derivative(x)).collect()
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Identity => "identity",
            Activation::Relu => "relu",
            Activation::Selu => "selu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "identity" | "linear" => Ok(Activation::Identity),
            "relu" => Ok(Activation::Relu),
            "selu" => Ok(Activation::Selu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            other => Err(format!("unknown activation `{other}`")),
        }
    }
}
