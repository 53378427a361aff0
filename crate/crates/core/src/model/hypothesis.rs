//! Deployable scoring artifact: per-entity representation tables plus the
//! fusion parameters. Input values and first-layer matrices are not needed.

use crate::error::{shape_err, Result};
use crate::numerics::{Activation, DenseMatrix, Mlp, Real};

use super::network::biased_dot;

#[derive(Debug, Clone, PartialEq)]
pub enum Fusion<T> {
    /// `f([z_u, z_i])`
    Concat { head: Mlp<T> },
    /// `f([z_u ⊙ z_i, h([v_u, v_i])])`; `v` tables are the linear-pathway
    /// precursors of each entity.
    Cfnet {
        user_linear: DenseMatrix<T>,
        item_linear: DenseMatrix<T>,
        joint: Mlp<T>,
        head: Mlp<T>,
    },
    /// `act(⟨z_u, z_i⟩ + b_u + c_i + μ)`
    Dot {
        user_bias: Vec<T>,
        item_bias: Vec<T>,
        global: T,
        output_activation: Activation,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis<T> {
    /// `Z^u`, one row per user.
    pub user_repr: DenseMatrix<T>,
    /// `Z^i`, one row per item.
    pub item_repr: DenseMatrix<T>,
    pub fusion: Fusion<T>,
}

pub(crate) fn hadamard<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

impl<T: Real> Hypothesis<T> {
    pub fn num_users(&self) -> usize {
        self.user_repr.rows()
    }

    pub fn num_items(&self) -> usize {
        self.item_repr.rows()
    }

    pub fn score(&self, j: usize, k: usize) -> Result<T> {
        if j >= self.num_users() || k >= self.num_items() {
            return shape_err(format!(
                "pair ({j}, {k}) outside a {}x{} hypothesis",
                self.num_users(),
                self.num_items()
            ));
        }
        let zu = self.user_repr.row(j);
        let zi = self.item_repr.row(k);
        match &self.fusion {
            Fusion::Concat { head } => Ok(head.predict(&[zu, zi].concat())?[0]),
            Fusion::Cfnet {
                user_linear,
                item_linear,
                joint,
                head,
            } => {
                let z2 = joint.predict(&[user_linear.row(j), item_linear.row(k)].concat())?;
                Ok(head.predict(&[hadamard(zu, zi), z2].concat())?[0])
            }
            Fusion::Dot {
                user_bias,
                item_bias,
                global,
                output_activation,
            } => Ok(output_activation.apply(biased_dot(zu, zi, user_bias[j], item_bias[k], *global))),
        }
    }

    pub fn score_items(&self, j: usize, items: &[u32]) -> Result<Vec<T>> {
        items.iter().map(|&k| self.score(j, k as usize)).collect()
    }

    /// Scores of user `j` against every item, in item order.
    pub fn score_all(&self, j: usize) -> Result<Vec<T>> {
        (0..self.num_items()).map(|k| self.score(j, k)).collect()
    }
}
