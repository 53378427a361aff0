//! Variant architectures sharing one forward/backward contract.
//!
//! Every variant scores a `(user, item)` pair. The interaction-input variants
//! feed user `j`'s row of the training matrix through `g^u` and item `k`'s
//! column through `g^i`; the `inp-*` variants additionally learn the values
//! in those rows and columns.

mod branch;
mod config;
mod hypothesis;
mod network;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use branch::{first_layer, Branch, BranchTape};
pub use config::{theoretical_param_count, CfnetConfig, ModelConfig, Variant};
pub use hypothesis::{Fusion, Hypothesis};
pub use network::{CfnetParts, Factors, Network, TensorInfo, Towers};

use crate::data::{init_inputs, InputPattern, InteractionMatrix, LearnableInputSet};
use crate::error::{shape_err, Error, Result};
use crate::numerics::{DenseMatrix, MlpTape, Real};
use crate::rng::{self, Stream};
use hypothesis::hadamard;

/// Learnable input scalars for a training matrix: `2 * nnz`.
pub fn input_count(matrix: &InteractionMatrix) -> usize {
    2 * matrix.nnz()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub network: usize,
    /// Zero unless the variant trains its inputs.
    pub inputs: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.network + self.inputs
    }
}

/// Gradient buffers shaped like a model's trainable state.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T> {
    pub network: Network<T>,
    /// Empty unless the variant trains its inputs.
    pub u: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Gradients<T> {
    pub fn zero(&mut self) {
        self.network.fill_zero();
        self.u.iter_mut().for_each(|g| *g = T::zero());
        self.v.iter_mut().for_each(|g| *g = T::zero());
    }

    pub fn scale(&mut self, factor: T) {
        for t in self.network.tensors_mut() {
            t.iter_mut().for_each(|g| *g *= factor);
        }
        self.u.iter_mut().for_each(|g| *g *= factor);
        self.v.iter_mut().for_each(|g| *g *= factor);
    }
}

#[derive(Debug, Clone)]
struct CfnetTape<T> {
    user_linear: BranchTape<T>,
    item_linear: BranchTape<T>,
    joint: MlpTape<T>,
}

#[derive(Debug, Clone)]
enum TapeKind<T> {
    Towers {
        user: BranchTape<T>,
        item: BranchTape<T>,
        z_user: Vec<T>,
        z_item: Vec<T>,
        cfnet: Option<CfnetTape<T>>,
        head: MlpTape<T>,
    },
    Factors,
}

/// Intermediate values of one [`CfModel::forward_pair`] call.
#[derive(Debug, Clone)]
pub struct PairTape<T> {
    user: usize,
    item: usize,
    generation: u64,
    kind: TapeKind<T>,
}

impl<T> PairTape<T> {
    pub fn pair(&self) -> (usize, usize) {
        (self.user, self.item)
    }
}

/// Index/weight slots feeding one entity's first layer.
enum Slots<'a, T> {
    Pattern(&'a [u32], &'a [T]),
    OneHot([u32; 1], [T; 1]),
}

impl<T> Slots<'_, T> {
    fn parts(&self) -> (&[u32], &[T]) {
        match self {
            Slots::Pattern(i, w) => (i, w),
            Slots::OneHot(i, w) => (i, w),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CfModel<T> {
    config: ModelConfig,
    network: Network<T>,
    inputs: LearnableInputSet<T>,
    /// Bumped on every mutable access; tapes from older generations are stale.
    generation: u64,
}

/// Equality of configuration and every trainable value.
impl<T: Real> PartialEq for CfModel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.network == other.network && self.inputs == other.inputs
    }
}

impl<T: Real> CfModel<T> {
    /// Initializes parameters from the `init` stream of `seed`. `value_max`
    /// scales rating inputs into `[0, 1]`.
    pub fn new(config: ModelConfig, train: &InteractionMatrix, value_max: f64, seed: u64) -> Result<Self> {
        let mut rng = rng::stream(seed, Stream::Init);
        let mean = train.mean_value().unwrap_or(0.0);
        let network = Network::init(&config, train.num_users(), train.num_items(), mean, &mut rng)?;
        let inputs = init_inputs(train, config.input_init, value_max);
        Ok(Self {
            config,
            network,
            inputs,
            generation: 0,
        })
    }

    /// Reassembles a model, checking that `network` has the shapes `config`
    /// implies for the pattern's dimensions.
    pub fn from_parts(config: ModelConfig, network: Network<T>, inputs: LearnableInputSet<T>) -> Result<Self> {
        let pattern = inputs.pattern();
        let reference: Network<T> = Network::init(
            &config,
            pattern.num_users(),
            pattern.num_items(),
            0.0,
            &mut ChaCha8Rng::seed_from_u64(0),
        )?;
        if reference.tensor_infos() != network.tensor_infos() {
            return shape_err(format!(
                "network tensors do not match a {} model of {} users and {} items",
                config.variant,
                pattern.num_users(),
                pattern.num_items()
            ));
        }
        Ok(Self {
            config,
            network,
            inputs,
            generation: 0,
        })
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn variant(&self) -> Variant {
        self.config.variant
    }

    pub fn num_users(&self) -> usize {
        self.inputs.pattern().num_users()
    }

    pub fn num_items(&self) -> usize {
        self.inputs.pattern().num_items()
    }

    pub fn network(&self) -> &Network<T> {
        &self.network
    }

    pub fn network_mut(&mut self) -> &mut Network<T> {
        self.generation += 1;
        &mut self.network
    }

    pub fn inputs(&self) -> &LearnableInputSet<T> {
        &self.inputs
    }

    pub fn inputs_mut(&mut self) -> &mut LearnableInputSet<T> {
        self.generation += 1;
        &mut self.inputs
    }

    pub fn pattern(&self) -> &InputPattern {
        self.inputs.pattern()
    }

    pub fn learnable_inputs(&self) -> bool {
        self.config.variant.learnable_inputs()
    }

    pub fn param_counts(&self) -> ParamCounts {
        ParamCounts {
            network: self.network.param_count(),
            inputs: if self.learnable_inputs() { self.inputs.len() } else { 0 },
        }
    }

    pub fn zero_gradients(&self) -> Gradients<T> {
        self.zero_gradients_with(true)
    }

    /// Gradient buffers; input buffers stay empty (and input gradients are
    /// skipped) unless `inputs` is set and the variant trains its inputs.
    pub fn zero_gradients_with(&self, inputs: bool) -> Gradients<T> {
        let len = if inputs && self.learnable_inputs() {
            self.inputs.pattern().nnz()
        } else {
            0
        };
        Gradients {
            network: self.network.zeros_like(),
            u: vec![T::zero(); len],
            v: vec![T::zero(); len],
        }
    }

    fn user_slots(&self, j: usize) -> Slots<'_, T> {
        if self.config.variant.uses_interaction_inputs() {
            let (i, w) = self.inputs.user_inputs(j);
            Slots::Pattern(i, w)
        } else {
            Slots::OneHot([j as u32], [T::one()])
        }
    }

    fn item_slots(&self, k: usize) -> Slots<'_, T> {
        if self.config.variant.uses_interaction_inputs() {
            let (i, w) = self.inputs.item_inputs(k);
            Slots::Pattern(i, w)
        } else {
            Slots::OneHot([k as u32], [T::one()])
        }
    }

    fn check_pair(&self, j: usize, k: usize) -> Result<()> {
        if j >= self.num_users() || k >= self.num_items() {
            return shape_err(format!(
                "pair ({j}, {k}) outside a {}x{} model",
                self.num_users(),
                self.num_items()
            ));
        }
        Ok(())
    }

    /// `z^u_j`: output of the user branch.
    pub fn user_representation(&self, j: usize) -> Result<Vec<T>> {
        match &self.network {
            Network::Towers(t) => {
                let slots = self.user_slots(j);
                let (i, w) = slots.parts();
                t.user.predict(i, w)
            }
            Network::Factors(f) => Ok(f.user_factors.row(j).to_vec()),
        }
    }

    /// `z^i_k`: output of the item branch.
    pub fn item_representation(&self, k: usize) -> Result<Vec<T>> {
        match &self.network {
            Network::Towers(t) => {
                let slots = self.item_slots(k);
                let (i, w) = slots.parts();
                t.item.predict(i, w)
            }
            Network::Factors(f) => Ok(f.item_factors.row(k).to_vec()),
        }
    }

    /// Score of `(j, k)` and the tape needed to differentiate it.
    pub fn forward_pair(&self, j: usize, k: usize) -> Result<(T, PairTape<T>)> {
        self.check_pair(j, k)?;
        let (score, kind) = match &self.network {
            Network::Towers(t) => {
                let us = self.user_slots(j);
                let is = self.item_slots(k);
                let (ui, uw) = us.parts();
                let (ii, iw) = is.parts();
                let (z_user, user) = t.user.forward(ui, uw)?;
                let (z_item, item) = t.item.forward(ii, iw)?;
                let (head_in, cfnet) = match &t.cfnet {
                    None => ([z_user.as_slice(), &z_item].concat(), None),
                    Some(c) => {
                        let (v_user, user_linear) = c.user_linear.forward(ui, uw)?;
                        let (v_item, item_linear) = c.item_linear.forward(ii, iw)?;
                        let (z2, joint) = c.joint.forward(&[v_user, v_item].concat())?;
                        let head_in = [hadamard(&z_user, &z_item), z2].concat();
                        (
                            head_in,
                            Some(CfnetTape {
                                user_linear,
                                item_linear,
                                joint,
                            }),
                        )
                    }
                };
                let (out, head) = t.head.forward(&head_in)?;
                (
                    out[0],
                    TapeKind::Towers {
                        user,
                        item,
                        z_user,
                        z_item,
                        cfnet,
                        head,
                    },
                )
            }
            Network::Factors(f) => (f.score(j, k), TapeKind::Factors),
        };
        Ok((
            score,
            PairTape {
                user: j,
                item: k,
                generation: self.generation,
                kind,
            },
        ))
    }

    /// CFNet scoring; rejects other variants.
    pub fn forward_pair_cfnet(&self, j: usize, k: usize) -> Result<(T, PairTape<T>)> {
        if !self.config.variant.is_cfnet() {
            return Err(Error::Config(format!("{} is not a cfnet variant", self.variant())));
        }
        self.forward_pair(j, k)
    }

    /// Id-input NCF scoring; rejects other variants.
    pub fn forward_id_baseline(&self, j: usize, k: usize) -> Result<T> {
        if self.variant() != Variant::NcfId {
            return Err(Error::Config(format!("{} is not ncf-id", self.variant())));
        }
        Ok(self.forward_pair(j, k)?.0)
    }

    /// Matrix factorization scoring; rejects other variants.
    pub fn forward_mf(&self, j: usize, k: usize) -> Result<T> {
        match &self.network {
            Network::Factors(f) => {
                self.check_pair(j, k)?;
                Ok(f.score(j, k))
            }
            Network::Towers(_) => Err(Error::Config(format!("{} is not mf", self.variant()))),
        }
    }

    pub fn predict(&self, j: usize, k: usize) -> Result<T> {
        Ok(self.forward_pair(j, k)?.0)
    }

    /// Adds `d_score * ∂score/∂θ` into `grads`, and for learnable-input
    /// variants the gradients of the touched `U_j` and `V_k` slots.
    pub fn backward_pair(&self, tape: &PairTape<T>, d_score: T, grads: &mut Gradients<T>) -> Result<()> {
        if tape.generation != self.generation {
            return Err(Error::Tape(format!(
                "tape from parameter generation {}, model is at {}",
                tape.generation, self.generation
            )));
        }
        let (j, k) = tape.pair();
        self.check_pair(j, k)?;
        let learn = self.learnable_inputs() && !(grads.u.is_empty() && grads.v.is_empty());
        if learn && (grads.u.len() != self.inputs.u.len() || grads.v.len() != self.inputs.v.len()) {
            return shape_err("input gradient buffers do not match the input set");
        }
        match (&self.network, &tape.kind, &mut grads.network) {
            (
                Network::Towers(t),
                TapeKind::Towers {
                    user,
                    item,
                    z_user,
                    z_item,
                    cfnet,
                    head,
                },
                Network::Towers(g),
            ) => {
                let d_head = t.head.backward_into(head, &[d_score], &mut g.head.params)?;
                let width = z_user.len();
                let us = self.user_slots(j);
                let is = self.item_slots(k);
                let (ui, uw) = us.parts();
                let (ii, iw) = is.parts();
                let u_range = self.inputs.pattern().user_range(j);
                let v_range = self.inputs.pattern().item_range(k);

                let (dz_user, dz_item) = match (&t.cfnet, cfnet, &mut g.cfnet) {
                    (None, None, None) => (d_head[..width].to_vec(), d_head[width..].to_vec()),
                    (Some(c), Some(ct), Some(gc)) => {
                        let d1 = &d_head[..width];
                        let dv = c.joint.backward_into(&ct.joint, &d_head[width..], &mut gc.joint.params)?;
                        let lw = c.user_linear.embed.cols();
                        c.user_linear.backward_into(
                            ui,
                            uw,
                            &ct.user_linear,
                            &dv[..lw],
                            &mut gc.user_linear,
                            learn.then(|| &mut grads.u[u_range.clone()]),
                        )?;
                        c.item_linear.backward_into(
                            ii,
                            iw,
                            &ct.item_linear,
                            &dv[lw..],
                            &mut gc.item_linear,
                            learn.then(|| &mut grads.v[v_range.clone()]),
                        )?;
                        (hadamard(d1, z_item), hadamard(d1, z_user))
                    }
                    _ => return Err(Error::Tape("cfnet parts do not match the tape".into())),
                };
                t.user.backward_into(
                    ui,
                    uw,
                    user,
                    &dz_user,
                    &mut g.user,
                    learn.then(|| &mut grads.u[u_range]),
                )?;
                t.item.backward_into(
                    ii,
                    iw,
                    item,
                    &dz_item,
                    &mut g.item,
                    learn.then(|| &mut grads.v[v_range]),
                )?;
            }
            (Network::Factors(f), TapeKind::Factors, Network::Factors(g)) => {
                let d = d_score * f.output_activation.derivative(f.raw_score(j, k));
                crate::numerics::axpy(d, f.item_factors.row(k), g.user_factors.row_mut(j));
                crate::numerics::axpy(d, f.user_factors.row(j), g.item_factors.row_mut(k));
                g.user_bias[j] += d;
                g.item_bias[k] += d;
                g.global[0] += d;
            }
            _ => return Err(Error::Tape("tape or gradients belong to a different architecture".into())),
        }
        Ok(())
    }

    /// Representation tables and fusion parameters; scores exactly match
    /// [`CfModel::forward_pair`].
    pub fn export_hypothesis(&self) -> Result<Hypothesis<T>> {
        let (m, n) = (self.num_users(), self.num_items());
        let table = |rows: usize, f: &dyn Fn(usize) -> Result<Vec<T>>, width: usize| -> Result<DenseMatrix<T>> {
            let mut values = Vec::with_capacity(rows * width);
            for r in 0..rows {
                values.extend(f(r)?);
            }
            DenseMatrix::from_vec(rows, width, values)
        };
        match &self.network {
            Network::Towers(t) => {
                let user_repr = table(m, &|j| self.user_representation(j), t.user.output_width())?;
                let item_repr = table(n, &|k| self.item_representation(k), t.item.output_width())?;
                let fusion = match &t.cfnet {
                    None => Fusion::Concat { head: t.head.clone() },
                    Some(c) => {
                        let user_linear = table(
                            m,
                            &|j| {
                                let s = self.user_slots(j);
                                let (i, w) = s.parts();
                                c.user_linear.predict(i, w)
                            },
                            c.user_linear.output_width(),
                        )?;
                        let item_linear = table(
                            n,
                            &|k| {
                                let s = self.item_slots(k);
                                let (i, w) = s.parts();
                                c.item_linear.predict(i, w)
                            },
                            c.item_linear.output_width(),
                        )?;
                        Fusion::Cfnet {
                            user_linear,
                            item_linear,
                            joint: c.joint.clone(),
                            head: t.head.clone(),
                        }
                    }
                };
                Ok(Hypothesis {
                    user_repr,
                    item_repr,
                    fusion,
                })
            }
            Network::Factors(f) => Ok(Hypothesis {
                user_repr: f.user_factors.clone(),
                item_repr: f.item_factors.clone(),
                fusion: Fusion::Dot {
                    user_bias: f.user_bias.clone(),
                    item_bias: f.item_bias.clone(),
                    global: f.global[0],
                    output_activation: f.output_activation,
                },
            }),
        }
    }
}

/// Score of `(j, k)` under an exported hypothesis.
pub fn score_hypothesis<T: Real>(hypothesis: &Hypothesis<T>, j: usize, k: usize) -> Result<T> {
    hypothesis.score(j, k)
}
