//! Dense first-order optimizers. Every step updates every scalar of the
//! tensors it is given; L2 adds `l2 * p` to the gradient of decayed tensors.

use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::numerics::Real;

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const RMSPROP_RHO: f64 = 0.9;
pub const EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam,
    Rmsprop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    #[serde(default)]
    pub l2_weight: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            learning_rate,
            l2_weight: 0.0,
        }
    }

    pub fn adam(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Adam,
            learning_rate,
            l2_weight: 0.0,
        }
    }

    pub fn rmsprop(learning_rate: f64) -> Self {
        Self {
            kind: OptimizerKind::Rmsprop,
            learning_rate,
            l2_weight: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate.is_finite() && self.learning_rate >= 0.0) {
            return Err(Error::Config(format!(
                "learning rate must be finite and non-negative, got {}",
                self.learning_rate
            )));
        }
        if !(self.l2_weight.is_finite() && self.l2_weight >= 0.0) {
            return Err(Error::Config(format!("l2 weight must be non-negative, got {}", self.l2_weight)));
        }
        Ok(())
    }
}

/// Per-tensor moment buffers. Empty until the first step.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct OptimizerState<T> {
    pub steps: u64,
    /// Adam first moment.
    pub first: Vec<Vec<T>>,
    /// Adam second moment or RMSprop mean square.
    pub second: Vec<Vec<T>>,
}

impl<T: Real> OptimizerState<T> {
    pub fn new() -> Self {
        Self {
            steps: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    fn ensure(&mut self, kind: OptimizerKind, lens: &[usize]) -> Result<()> {
        let want_first = matches!(kind, OptimizerKind::Adam);
        let want_second = !matches!(kind, OptimizerKind::Sgd);
        for (buf, wanted) in [(&mut self.first, want_first), (&mut self.second, want_second)] {
            if !wanted {
                continue;
            }
            if buf.is_empty() {
                *buf = lens.iter().map(|&l| vec![T::zero(); l]).collect();
            } else if buf.len() != lens.len() || buf.iter().zip(lens).any(|(b, &l)| b.len() != l) {
                return shape_err("optimizer state does not match the parameter tensors");
            }
        }
        Ok(())
    }
}

/// One update of `params` from `grads`. `decay[i]` enables L2 on tensor `i`.
/// A non-finite gradient aborts before anything is modified.
pub fn optimizer_step<T: Real>(
    config: &OptimizerConfig,
    params: &mut [&mut [T]],
    grads: &[&[T]],
    decay: &[bool],
    state: &mut OptimizerState<T>,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != decay.len() {
        return shape_err(format!(
            "{} parameter tensors, {} gradients, {} decay flags",
            params.len(),
            grads.len(),
            decay.len()
        ));
    }
    for (i, (p, g)) in params.iter().zip(grads).enumerate() {
        if p.len() != g.len() {
            return shape_err(format!("tensor {i}: {} parameters but {} gradients", p.len(), g.len()));
        }
        if let Some(bad) = g.iter().position(|x| !x.is_finite()) {
            return Err(Error::Numerical(format!("non-finite gradient in tensor {i} at {bad}")));
        }
    }
    let lens: Vec<usize> = params.iter().map(|p| p.len()).collect();
    state.ensure(config.kind, &lens)?;
    state.steps += 1;

    let lr = T::lit(config.learning_rate);
    let l2 = T::lit(config.l2_weight);
    let one = T::one();
    let eps = T::lit(EPSILON);
    match config.kind {
        OptimizerKind::Sgd => {
            for ((p, g), &d) in params.iter_mut().zip(grads).zip(decay) {
                for (p, &g) in p.iter_mut().zip(g.iter()) {
                    let g = if d { g + l2 * *p } else { g };
                    *p -= lr * g;
                }
            }
        }
        OptimizerKind::Adam => {
            let b1 = T::lit(ADAM_BETA1);
            let b2 = T::lit(ADAM_BETA2);
            let t = state.steps as i32;
            let c1 = one - T::lit(ADAM_BETA1.powi(t));
            let c2 = one - T::lit(ADAM_BETA2.powi(t));
            for (i, ((p, g), &d)) in params.iter_mut().zip(grads).zip(decay).enumerate() {
                let (m, v) = (&mut state.first[i], &mut state.second[i]);
                for (((p, &g), m), v) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                    let g = if d { g + l2 * *p } else { g };
                    *m = b1 * *m + (one - b1) * g;
                    *v = b2 * *v + (one - b2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= lr * m_hat / (v_hat.sqrt() + eps);
                }
            }
        }
        OptimizerKind::Rmsprop => {
            let rho = T::lit(RMSPROP_RHO);
            for (i, ((p, g), &d)) in params.iter_mut().zip(grads).zip(decay).enumerate() {
                let s = &mut state.second[i];
                for ((p, &g), s) in p.iter_mut().zip(g.iter()).zip(s.iter_mut()) {
                    let g = if d { g + l2 * *p } else { g };
                    *s = rho * *s + (one - rho) * g * g;
                    *p -= lr * g / (s.sqrt() + eps);
                }
            }
        }
    }
    Ok(())
}
