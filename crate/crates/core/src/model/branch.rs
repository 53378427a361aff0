//! The implicit-embedding first layer and the branch MLPs built on it.

use crate::error::{shape_err, Result};
use crate::numerics::{axpy, dot, Activation, DenseMatrix, Mlp, MlpTape, Real};

/// `σ(Σ_l w_l · P[l, :])` over the non-zero slots of one entity's input row.
///
/// `indices` select rows of `embed` and `weights` are the matching input
/// values. An empty slot list yields `σ(0)`.
pub fn first_layer<T: Real>(
    indices: &[u32],
    weights: &[T],
    embed: &DenseMatrix<T>,
    activation: Activation,
) -> Result<Vec<T>> {
    let pre = weighted_rows(indices, weights, embed, &[])?;
    Ok(activation.apply_slice(&pre))
}

/// Sparse gather of `embed` rows, weighted sum, plus optional bias.
pub(crate) fn weighted_rows<T: Real>(
    indices: &[u32],
    weights: &[T],
    embed: &DenseMatrix<T>,
    bias: &[T],
) -> Result<Vec<T>> {
    if indices.len() != weights.len() {
        return shape_err(format!(
            "{} indices but {} weights",
            indices.len(),
            weights.len()
        ));
    }
    let mut acc = if bias.is_empty() {
        vec![T::zero(); embed.cols()]
    } else {
        bias.to_vec()
    };
    for (&l, &w) in indices.iter().zip(weights) {
        let l = l as usize;
        if l >= embed.rows() {
            return shape_err(format!(
                "input index {l} outside an embedding with {} rows",
                embed.rows()
            ));
        }
        axpy(w, embed.row(l), &mut acc);
    }
    Ok(acc)
}

/// `g(·)`: sparse first layer followed by an optional dense tail.
#[derive(Debug, Clone, PartialEq)]
pub struct Branch<T> {
    /// `P`, one row per input slot index.
    pub embed: DenseMatrix<T>,
    /// Empty when biases are disabled.
    pub embed_bias: Vec<T>,
    pub activation: Activation,
    pub tail: Option<Mlp<T>>,
}

#[derive(Debug, Clone)]
pub struct BranchTape<T> {
    pre: Vec<T>,
    first: Vec<T>,
    tail: Option<MlpTape<T>>,
}

impl<T: Real> BranchTape<T> {
    /// Output of the first layer, `y`.
    pub fn first_output(&self) -> &[T] {
        &self.first
    }
}

impl<T: Real> Branch<T> {
    pub fn output_width(&self) -> usize {
        match &self.tail {
            Some(t) => t.spec.output_width(),
            None => self.embed.cols(),
        }
    }

    pub fn forward(&self, indices: &[u32], weights: &[T]) -> Result<(Vec<T>, BranchTape<T>)> {
        let pre = weighted_rows(indices, weights, &self.embed, &self.embed_bias)?;
        let first = self.activation.apply_slice(&pre);
        let (out, tail) = match &self.tail {
            Some(mlp) => {
                let (out, tape) = mlp.forward(&first)?;
                (out, Some(tape))
            }
            None => (first.clone(), None),
        };
        Ok((out, BranchTape { pre, first, tail }))
    }

    pub fn predict(&self, indices: &[u32], weights: &[T]) -> Result<Vec<T>> {
        Ok(self.forward(indices, weights)?.0)
    }

    /// Accumulates parameter gradients into `grads`; when `input_grads` is
    /// given, also adds `∂loss/∂w_l` for every slot.
    pub fn backward_into(
        &self,
        indices: &[u32],
        weights: &[T],
        tape: &BranchTape<T>,
        output_grad: &[T],
        grads: &mut Branch<T>,
        input_grads: Option<&mut [T]>,
    ) -> Result<()> {
        let dfirst = match (&self.tail, &tape.tail, &mut grads.tail) {
            (Some(mlp), Some(t), Some(g)) => mlp.backward_into(t, output_grad, &mut g.params)?,
            (None, None, None) => output_grad.to_vec(),
            _ => return shape_err("branch tail does not match its tape or gradient buffer"),
        };
        if dfirst.len() != self.embed.cols() || tape.pre.len() != self.embed.cols() {
            return shape_err("branch first-layer width mismatch");
        }
        let dpre: Vec<T> = dfirst
            .iter()
            .zip(&tape.pre)
            .map(|(&d, &z)| d * self.activation.derivative(z))
            .collect();
        for (gb, &d) in grads.embed_bias.iter_mut().zip(&dpre) {
            *gb += d;
        }
        match input_grads {
            Some(dw) => {
                for ((&l, &w), g) in indices.iter().zip(weights).zip(dw.iter_mut()) {
                    let l = l as usize;
                    axpy(w, &dpre, grads.embed.row_mut(l));
                    *g += dot(self.embed.row(l), &dpre);
                }
            }
            None => {
                for (&l, &w) in indices.iter().zip(weights) {
                    axpy(w, &dpre, grads.embed.row_mut(l as usize));
                }
            }
        }
        Ok(())
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            embed: DenseMatrix::zeros(self.embed.rows(), self.embed.cols()),
            embed_bias: vec![T::zero(); self.embed_bias.len()],
            activation: self.activation,
            tail: self.tail.as_ref().map(|t| Mlp {
                spec: t.spec.clone(),
                params: t.zeros_like(),
            }),
        }
    }
}
