//! Trainable network parameters (everything except the input values).

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::branch::Branch;
use super::config::ModelConfig;
use crate::error::Result;
use crate::numerics::{dot, Activation, DenseMatrix, Mlp, Real};

/// `A^u`, `A^i` and the joint MLP `h` of the CFNet variants.
#[derive(Debug, Clone, PartialEq)]
pub struct CfnetParts<T> {
    pub user_linear: Branch<T>,
    pub item_linear: Branch<T>,
    pub joint: Mlp<T>,
}

/// Branch networks `g^u`, `g^i` and fusion head `f`.
#[derive(Debug, Clone, PartialEq)]
pub struct Towers<T> {
    pub user: Branch<T>,
    pub item: Branch<T>,
    pub cfnet: Option<CfnetParts<T>>,
    pub head: Mlp<T>,
}

/// `⟨e_j, e_k⟩ + b_j + c_k + μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct Factors<T> {
    pub user_factors: DenseMatrix<T>,
    pub item_factors: DenseMatrix<T>,
    pub user_bias: Vec<T>,
    pub item_bias: Vec<T>,
    /// Single-entry global offset.
    pub global: Vec<T>,
    pub output_activation: Activation,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Network<T> {
    Towers(Towers<T>),
    Factors(Factors<T>),
}

/// Name, shape and decay flag of one parameter tensor.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorInfo {
    pub name: String,
    pub shape: Vec<usize>,
    /// Whether L2 regularization applies (weight matrices only).
    pub decay: bool,
}

impl TensorInfo {
    pub fn len(&self) -> usize {
        self.shape.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn matrix_info(name: String, m: (usize, usize)) -> TensorInfo {
    TensorInfo {
        name,
        shape: vec![m.0, m.1],
        decay: true,
    }
}

fn vector_info(name: String, len: usize) -> TensorInfo {
    TensorInfo {
        name,
        shape: vec![len],
        decay: false,
    }
}

fn mlp_infos<T: Real>(prefix: &str, mlp: &Mlp<T>, out: &mut Vec<TensorInfo>) {
    for (l, (w, b)) in mlp.params.weights.iter().zip(&mlp.params.biases).enumerate() {
        out.push(matrix_info(format!("{prefix}.w{l}"), w.shape()));
        out.push(vector_info(format!("{prefix}.b{l}"), b.len()));
    }
}

fn branch_infos<T: Real>(prefix: &str, b: &Branch<T>, out: &mut Vec<TensorInfo>) {
    out.push(matrix_info(format!("{prefix}.embed"), b.embed.shape()));
    out.push(vector_info(format!("{prefix}.embed_bias"), b.embed_bias.len()));
    if let Some(t) = &b.tail {
        mlp_infos(&format!("{prefix}.tail"), t, out);
    }
}

fn branch_tensors<'a, T: Real>(b: &'a Branch<T>, out: &mut Vec<&'a [T]>) {
    out.push(b.embed.as_slice());
    out.push(&b.embed_bias);
    if let Some(t) = &b.tail {
        out.extend(t.params.tensors());
    }
}

fn branch_tensors_mut<'a, T: Real>(b: &'a mut Branch<T>, out: &mut Vec<&'a mut [T]>) {
    out.push(b.embed.as_mut_slice());
    out.push(&mut b.embed_bias);
    if let Some(t) = &mut b.tail {
        out.extend(t.params.tensors_mut());
    }
}

impl<T: Real> Network<T> {
    /// Fresh parameters drawn from `rng` in a fixed order: user branch, item
    /// branch, CFNet parts, head.
    pub fn init<R: Rng + ?Sized>(
        config: &ModelConfig,
        users: usize,
        items: usize,
        global_mean: f64,
        rng: &mut R,
    ) -> Result<Self> {
        config.validate()?;
        if let Some(d) = config.factors.filter(|_| config.variant == super::Variant::Mf) {
            let global = if config.output_activation == Activation::Identity {
                global_mean
            } else {
                0.0
            };
            return Ok(Network::Factors(Factors {
                user_factors: DenseMatrix::glorot(users, d, rng),
                item_factors: DenseMatrix::glorot(items, d, rng),
                user_bias: vec![T::zero(); users],
                item_bias: vec![T::zero(); items],
                global: vec![T::lit(global)],
                output_activation: config.output_activation,
            }));
        }
        // Interaction inputs index the opposite entity; one-hot ids index
        // the entity itself.
        let (user_rows, item_rows) = if config.variant.uses_interaction_inputs() {
            (items, users)
        } else {
            (users, items)
        };
        let branch = |rows: usize, layers: &[usize], rng: &mut R| -> Result<Branch<T>> {
            let embed = DenseMatrix::glorot(rows, layers[0], rng);
            let tail = match config.tail_spec(layers) {
                Some(spec) => Some(Mlp::init(spec, rng)?),
                None => None,
            };
            Ok(Branch {
                embed,
                embed_bias: vec![T::zero(); if config.bias { layers[0] } else { 0 }],
                activation: config.first_activation(),
                tail,
            })
        };
        let user = branch(user_rows, &config.user_layers, rng)?;
        let item = branch(item_rows, &config.item_layers, rng)?;
        let cfnet = match (&config.cfnet, config.joint_spec()) {
            (Some(c), Some(joint)) => {
                let linear = |rows: usize, rng: &mut R| Branch {
                    embed: DenseMatrix::glorot(rows, c.linear_width, rng),
                    embed_bias: Vec::new(),
                    activation: c.linear_activation,
                    tail: None,
                };
                let user_linear = linear(items, rng);
                let item_linear = linear(users, rng);
                Some(CfnetParts {
                    user_linear,
                    item_linear,
                    joint: Mlp::init(joint, rng)?,
                })
            }
            _ => None,
        };
        let head = Mlp::init(config.head_spec(), rng)?;
        Ok(Network::Towers(Towers {
            user,
            item,
            cfnet,
            head,
        }))
    }

    pub fn zeros_like(&self) -> Self {
        match self {
            Network::Towers(t) => Network::Towers(Towers {
                user: t.user.zeros_like(),
                item: t.item.zeros_like(),
                cfnet: t.cfnet.as_ref().map(|c| CfnetParts {
                    user_linear: c.user_linear.zeros_like(),
                    item_linear: c.item_linear.zeros_like(),
                    joint: Mlp {
                        spec: c.joint.spec.clone(),
                        params: c.joint.zeros_like(),
                    },
                }),
                head: Mlp {
                    spec: t.head.spec.clone(),
                    params: t.head.zeros_like(),
                },
            }),
            Network::Factors(f) => Network::Factors(Factors {
                user_factors: DenseMatrix::zeros(f.user_factors.rows(), f.user_factors.cols()),
                item_factors: DenseMatrix::zeros(f.item_factors.rows(), f.item_factors.cols()),
                user_bias: vec![T::zero(); f.user_bias.len()],
                item_bias: vec![T::zero(); f.item_bias.len()],
                global: vec![T::zero(); 1],
                output_activation: f.output_activation,
            }),
        }
    }

    /// Descriptors in the order of [`Network::tensors`].
    pub fn tensor_infos(&self) -> Vec<TensorInfo> {
        let mut out = Vec::new();
        match self {
            Network::Towers(t) => {
                branch_infos("user", &t.user, &mut out);
                branch_infos("item", &t.item, &mut out);
                if let Some(c) = &t.cfnet {
                    branch_infos("user_linear", &c.user_linear, &mut out);
                    branch_infos("item_linear", &c.item_linear, &mut out);
                    mlp_infos("joint", &c.joint, &mut out);
                }
                mlp_infos("head", &t.head, &mut out);
            }
            Network::Factors(f) => {
                out.push(matrix_info("user_factors".into(), f.user_factors.shape()));
                out.push(matrix_info("item_factors".into(), f.item_factors.shape()));
                out.push(vector_info("user_bias".into(), f.user_bias.len()));
                out.push(vector_info("item_bias".into(), f.item_bias.len()));
                out.push(vector_info("global".into(), 1));
            }
        }
        out
    }

    pub fn tensors(&self) -> Vec<&[T]> {
        let mut out = Vec::new();
        match self {
            Network::Towers(t) => {
                branch_tensors(&t.user, &mut out);
                branch_tensors(&t.item, &mut out);
                if let Some(c) = &t.cfnet {
                    branch_tensors(&c.user_linear, &mut out);
                    branch_tensors(&c.item_linear, &mut out);
                    out.extend(c.joint.params.tensors());
                }
                out.extend(t.head.params.tensors());
            }
            Network::Factors(f) => {
                out.push(f.user_factors.as_slice());
                out.push(f.item_factors.as_slice());
                out.push(&f.user_bias);
                out.push(&f.item_bias);
                out.push(&f.global);
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut out = Vec::new();
        match self {
            Network::Towers(t) => {
                branch_tensors_mut(&mut t.user, &mut out);
                branch_tensors_mut(&mut t.item, &mut out);
                if let Some(c) = &mut t.cfnet {
                    branch_tensors_mut(&mut c.user_linear, &mut out);
                    branch_tensors_mut(&mut c.item_linear, &mut out);
                    out.extend(c.joint.params.tensors_mut());
                }
                out.extend(t.head.params.tensors_mut());
            }
            Network::Factors(f) => {
                out.push(f.user_factors.as_mut_slice());
                out.push(f.item_factors.as_mut_slice());
                out.push(&mut f.user_bias);
                out.push(&mut f.item_bias);
                out.push(&mut f.global);
            }
        }
        out
    }

    /// Allocated trainable scalars.
    pub fn param_count(&self) -> usize {
        self.tensors().iter().map(|t| t.len()).sum()
    }

    pub fn fill_zero(&mut self) {
        for t in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn towers(&self) -> Option<&Towers<T>> {
        match self {
            Network::Towers(t) => Some(t),
            Network::Factors(_) => None,
        }
    }

    pub fn factors(&self) -> Option<&Factors<T>> {
        match self {
            Network::Factors(f) => Some(f),
            Network::Towers(_) => None,
        }
    }
}

impl<T: Real> Factors<T> {
    /// Score before the output activation.
    pub fn raw_score(&self, j: usize, k: usize) -> T {
        biased_dot(
            self.user_factors.row(j),
            self.item_factors.row(k),
            self.user_bias[j],
            self.item_bias[k],
            self.global[0],
        )
    }

    pub fn score(&self, j: usize, k: usize) -> T {
        self.output_activation.apply(self.raw_score(j, k))
    }
}

pub(crate) fn biased_dot<T: Real>(user: &[T], item: &[T], user_bias: T, item_bias: T, global: T) -> T {
    dot(user, item) + user_bias + item_bias + global
}
