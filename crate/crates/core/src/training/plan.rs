use serde::{Deserialize, Serialize};

use super::{LossKind, OptimizerConfig};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Schedule {
    /// Network and (for learnable-input variants) inputs together.
    Joint,
    /// Rounds of network-only then input-only training, each phase guarded
    /// against increasing the full training loss.
    Alternating {
        outer_rounds: usize,
        inner_epochs_theta: usize,
        inner_epochs_input: usize,
    },
    /// Joint training followed by input-only SGD with the network frozen.
    JointThenPostInput { post_lr: f64, post_epochs: usize },
}

fn default_batch() -> usize {
    256
}

fn default_patience() -> Option<usize> {
    Some(5)
}

fn default_negatives() -> usize {
    4
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainPlan {
    pub loss: LossKind,
    pub optimizer: OptimizerConfig,
    /// Optimizer for the input values; defaults to `optimizer` without L2.
    #[serde(default)]
    pub input_optimizer: Option<OptimizerConfig>,
    pub schedule: Schedule,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub max_epochs: usize,
    /// `None` trains for `max_epochs` and keeps the final parameters.
    #[serde(default = "default_patience")]
    pub early_stop_patience: Option<usize>,
    pub seed: u64,
    #[serde(default = "default_negatives")]
    pub negatives_per_positive: usize,
}

impl TrainPlan {
    pub fn new(loss: LossKind, optimizer: OptimizerConfig, max_epochs: usize, seed: u64) -> Self {
        Self {
            loss,
            optimizer,
            input_optimizer: None,
            schedule: Schedule::Joint,
            batch_size: default_batch(),
            max_epochs,
            early_stop_patience: default_patience(),
            seed,
            negatives_per_positive: default_negatives(),
        }
    }

    pub fn input_optimizer(&self) -> OptimizerConfig {
        self.input_optimizer.unwrap_or(OptimizerConfig {
            l2_weight: 0.0,
            ..self.optimizer
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("training: {m}")));
        self.optimizer.validate()?;
        if let Some(o) = &self.input_optimizer {
            o.validate()?;
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if self.loss == LossKind::Bce && self.negatives_per_positive == 0 {
            return bad("bce needs negatives_per_positive >= 1".into());
        }
        if self.early_stop_patience == Some(0) {
            return bad("early_stop_patience must be positive when set".into());
        }
        if let Schedule::JointThenPostInput { post_lr, .. } = self.schedule {
            if !(post_lr.is_finite() && post_lr >= 0.0) {
                return bad(format!("post_lr must be non-negative, got {post_lr}"));
            }
        }
        Ok(())
    }

    /// The schedule flattened into consecutive stages.
    pub fn stages(&self) -> Vec<Stage> {
        match self.schedule {
            Schedule::Joint => vec![Stage::joint(self.max_epochs)],
            Schedule::Alternating {
                outer_rounds,
                inner_epochs_theta,
                inner_epochs_input,
            } => (0..outer_rounds)
                .flat_map(|_| {
                    [
                        Stage {
                            phase: Phase::Theta,
                            epochs: inner_epochs_theta,
                        },
                        Stage {
                            phase: Phase::Inputs,
                            epochs: inner_epochs_input,
                        },
                    ]
                })
                .collect(),
            Schedule::JointThenPostInput { post_epochs, .. } => vec![
                Stage::joint(self.max_epochs),
                Stage {
                    phase: Phase::Post,
                    epochs: post_epochs,
                },
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Phase {
    /// Loss of the freshly initialized model.
    Init,
    Joint,
    /// Network only, inputs frozen.
    Theta,
    /// Inputs only, network frozen.
    Inputs,
    /// Inputs only with SGD at the post learning rate.
    Post,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Init => "init",
            Phase::Joint => "joint",
            Phase::Theta => "theta",
            Phase::Inputs => "inputs",
            Phase::Post => "post",
        }
    }

    pub fn updates_network(self) -> bool {
        matches!(self, Phase::Joint | Phase::Theta)
    }

    pub fn updates_inputs(self) -> bool {
        matches!(self, Phase::Joint | Phase::Inputs | Phase::Post)
    }

    /// Alternating phases roll back when they raise the training loss.
    pub fn guarded(self) -> bool {
        matches!(self, Phase::Theta | Phase::Inputs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stage {
    pub phase: Phase,
    pub epochs: usize,
}

impl Stage {
    fn joint(epochs: usize) -> Self {
        Self {
            phase: Phase::Joint,
            epochs,
        }
    }
}
