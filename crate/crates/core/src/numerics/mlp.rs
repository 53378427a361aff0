//! Fully connected feed-forward network over row vectors.
//!
//! Layer `l` computes `a_l = act(a_{l-1} W_l + b_l)` with `W_l` stored as a
//! `(widths[l-1], widths[l])` row-major matrix. Hidden layers share one
//! activation; the last layer has its own.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{axpy, dot, Activation, DenseMatrix, Real};
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    /// Input width followed by the width of every layer.
    pub widths: Vec<usize>,
    pub activation: Activation,
    pub output_activation: Activation,
    #[serde(default = "default_bias")]
    pub bias: bool,
}

fn default_bias() -> bool {
    true
}

impl MlpSpec {
    pub fn new(widths: Vec<usize>, activation: Activation, output_activation: Activation) -> Self {
        Self {
            widths,
            activation,
            output_activation,
            bias: true,
        }
    }

    pub fn without_bias(mut self) -> Self {
        self.bias = false;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.widths.len() < 2 {
            return Err(Error::Config(
                "an MLP needs an input width and at least one layer".into(),
            ));
        }
        if self.widths.contains(&0) {
            return Err(Error::Config(format!(
                "layer widths must be positive, got {:?}",
                self.widths
            )));
        }
        Ok(())
    }

    pub fn num_layers(&self) -> usize {
        self.widths.len() - 1
    }

    pub fn input_width(&self) -> usize {
        self.widths[0]
    }

    pub fn output_width(&self) -> usize {
        *self.widths.last().expect("validated spec")
    }

    fn layer_activation(&self, l: usize) -> Activation {
        if l + 1 == self.num_layers() {
            self.output_activation
        } else {
            self.activation
        }
    }

    pub fn param_count(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[0] * w[1] + if self.bias { w[1] } else { 0 })
            .sum()
    }
}

/// Weights and biases, one entry per layer. Biases are empty when the spec
/// disables them.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams<T> {
    pub weights: Vec<DenseMatrix<T>>,
    pub biases: Vec<Vec<T>>,
}

impl<T: Real> MlpParams<T> {
    pub fn zeros(spec: &MlpSpec) -> Self {
        let weights = spec
            .widths
            .windows(2)
            .map(|w| DenseMatrix::zeros(w[0], w[1]))
            .collect();
        let biases = spec
            .widths
            .iter()
            .skip(1)
            .map(|&w| vec![T::zero(); if spec.bias { w } else { 0 }])
            .collect();
        Self { weights, biases }
    }

    pub fn init<R: Rng + ?Sized>(spec: &MlpSpec, rng: &mut R) -> Self {
        let mut params = Self::zeros(spec);
        for (w, dims) in params.weights.iter_mut().zip(spec.widths.windows(2)) {
            *w = DenseMatrix::glorot(dims[0], dims[1], rng);
        }
        params
    }

    pub fn check(&self, spec: &MlpSpec) -> Result<()> {
        if self.weights.len() != spec.num_layers() || self.biases.len() != spec.num_layers() {
            return shape_err(format!(
                "{} weight matrices for a {}-layer spec",
                self.weights.len(),
                spec.num_layers()
            ));
        }
        for (l, dims) in spec.widths.windows(2).enumerate() {
            if self.weights[l].shape() != (dims[0], dims[1]) {
                return shape_err(format!(
                    "layer {l} weight is {:?}, spec wants {:?}",
                    self.weights[l].shape(),
                    (dims[0], dims[1])
                ));
            }
            let want = if spec.bias { dims[1] } else { 0 };
            if self.biases[l].len() != want {
                return shape_err(format!(
                    "layer {l} bias has {} entries, spec wants {want}",
                    self.biases[l].len()
                ));
            }
        }
        Ok(())
    }

    /// Flat views in a fixed order: `w0, b0, w1, b1, ...`.
    pub fn tensors(&self) -> Vec<&[T]> {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| [w.as_slice(), b.as_slice()])
            .collect()
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w.as_mut_slice(), b.as_mut_slice()])
            .collect()
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }
}

/// Values recorded by [`Mlp::forward`] for the matching backward pass.
#[derive(Debug, Clone)]
pub struct MlpTape<T> {
    widths: Vec<usize>,
    input: Vec<T>,
    pre: Vec<Vec<T>>,
    post: Vec<Vec<T>>,
}

impl<T: Real> MlpTape<T> {
    pub fn output(&self) -> &[T] {
        self.post.last().expect("at least one layer")
    }

    pub fn pre_activations(&self) -> &[Vec<T>] {
        &self.pre
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mlp<T> {
    pub spec: MlpSpec,
    pub params: MlpParams<T>,
}

impl<T: Real> Mlp<T> {
    pub fn new(spec: MlpSpec, params: MlpParams<T>) -> Result<Self> {
        spec.validate()?;
        params.check(&spec)?;
        Ok(Self { spec, params })
    }

    pub fn init<R: Rng + ?Sized>(spec: MlpSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let params = MlpParams::init(&spec, rng);
        Ok(Self { spec, params })
    }

    pub fn zeros_like(&self) -> MlpParams<T> {
        MlpParams::zeros(&self.spec)
    }

    fn check_input(&self, input: &[T]) -> Result<()> {
        if input.len() != self.spec.input_width() {
            return shape_err(format!(
                "MLP expects input width {}, got {}",
                self.spec.input_width(),
                input.len()
            ));
        }
        Ok(())
    }

    fn layer(&self, l: usize, x: &[T]) -> Vec<T> {
        let w = &self.params.weights[l];
        let mut z = if self.spec.bias {
            self.params.biases[l].clone()
        } else {
            vec![T::zero(); w.cols()]
        };
        for (i, &xi) in x.iter().enumerate() {
            axpy(xi, w.row(i), &mut z);
        }
        z
    }

    pub fn forward(&self, input: &[T]) -> Result<(Vec<T>, MlpTape<T>)> {
        self.check_input(input)?;
        let layers = self.spec.num_layers();
        let mut pre = Vec::with_capacity(layers);
        let mut post: Vec<Vec<T>> = Vec::with_capacity(layers);
        for l in 0..layers {
            let x = if l == 0 { input } else { &post[l - 1] };
            let z = self.layer(l, x);
            let a = self.spec.layer_activation(l).apply_slice(&z);
            pre.push(z);
            post.push(a);
        }
        let out = post[layers - 1].clone();
        let tape = MlpTape {
            widths: self.spec.widths.clone(),
            input: input.to_vec(),
            pre,
            post,
        };
        Ok((out, tape))
    }

    /// Forward pass without recording a tape.
    pub fn predict(&self, input: &[T]) -> Result<Vec<T>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        for l in 0..self.spec.num_layers() {
            let mut z = self.layer(l, &x);
            let act = self.spec.layer_activation(l);
            z.iter_mut().for_each(|v| *v = act.apply(*v));
            x = z;
        }
        Ok(x)
    }

    /// Accumulates parameter gradients into `grads` and returns the gradient
    /// with respect to the input.
    pub fn backward_into(
        &self,
        tape: &MlpTape<T>,
        output_grad: &[T],
        grads: &mut MlpParams<T>,
    ) -> Result<Vec<T>> {
        if tape.widths != self.spec.widths {
            return Err(Error::Tape(format!(
                "tape recorded for widths {:?}, network has {:?}",
                tape.widths, self.spec.widths
            )));
        }
        if output_grad.len() != self.spec.output_width() {
            return shape_err(format!(
                "output gradient has {} entries, network emits {}",
                output_grad.len(),
                self.spec.output_width()
            ));
        }
        grads.check(&self.spec)?;

        let mut delta = output_grad.to_vec();
        for l in (0..self.spec.num_layers()).rev() {
            let act = self.spec.layer_activation(l);
            for (d, &z) in delta.iter_mut().zip(&tape.pre[l]) {
                *d *= act.derivative(z);
            }
            let x: &[T] = if l == 0 { &tape.input } else { &tape.post[l - 1] };
            let w = &self.params.weights[l];
            let gw = &mut grads.weights[l];
            let mut dx = vec![T::zero(); x.len()];
            for (i, &xi) in x.iter().enumerate() {
                axpy(xi, &delta, gw.row_mut(i));
                dx[i] = dot(w.row(i), &delta);
            }
            if self.spec.bias {
                for (gb, &d) in grads.biases[l].iter_mut().zip(&delta) {
                    *gb += d;
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Fresh gradients for a single tape.
    pub fn backward(&self, tape: &MlpTape<T>, output_grad: &[T]) -> Result<(MlpParams<T>, Vec<T>)> {
        let mut grads = self.zeros_like();
        let input_grad = self.backward_into(tape, output_grad, &mut grads)?;
        Ok((grads, input_grad))
    }
}
