use log::{debug, info};
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{optimizer_step, LossKind, OptimizerConfig, OptimizerState, Phase, Stage, TrainPlan};
use crate::data::{sample_negatives_with, InteractionMatrix};
use crate::error::{Error, Result};
use crate::model::{CfModel, Hypothesis, Network};
use crate::numerics::{Activation, Real};
use crate::rng::{self, Stream};

/// Training matrix plus the optional held-out part used for early stopping.
#[derive(Debug, Clone, Copy)]
pub struct TrainData<'a> {
    pub train: &'a InteractionMatrix,
    pub validation: Option<&'a InteractionMatrix>,
}

impl<'a> TrainData<'a> {
    pub fn new(train: &'a InteractionMatrix, validation: Option<&'a InteractionMatrix>) -> Self {
        let validation = validation.filter(|v| !v.is_empty());
        Self { train, validation }
    }
}

/// One history row: either an epoch or the boundary of a guarded phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub phase: Phase,
    pub train_loss: f64,
    pub train_rmse: Option<f64>,
    pub val_loss: Option<f64>,
    pub val_rmse: Option<f64>,
    /// Present on phase-boundary rows of guarded phases.
    pub accepted: Option<bool>,
}

/// Network parameters and input values at one point in training.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot<T> {
    pub network: Network<T>,
    pub u: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Snapshot<T> {
    pub fn capture(model: &CfModel<T>) -> Self {
        Self {
            network: model.network().clone(),
            u: model.inputs().u.clone(),
            v: model.inputs().v.clone(),
        }
    }

    pub fn restore(&self, model: &mut CfModel<T>) {
        *model.network_mut() = self.network.clone();
        let inputs = model.inputs_mut();
        inputs.u.copy_from_slice(&self.u);
        inputs.v.copy_from_slice(&self.v);
    }
}

/// Best validation point of the current joint stage.
#[derive(Debug, Clone, PartialEq)]
pub struct BestPoint<T> {
    pub score: f64,
    pub record: EpochRecord,
    pub snapshot: Snapshot<T>,
}

/// Start of a guarded phase, restored if the phase raises the loss.
#[derive(Debug, Clone, PartialEq)]
pub struct GuardPoint<T> {
    pub record: EpochRecord,
    pub snapshot: Snapshot<T>,
    pub net_opt: OptimizerState<T>,
    pub input_opt: OptimizerState<T>,
}

/// Everything needed to continue a run exactly where it stopped.
#[derive(Debug, Clone)]
pub struct TrainState<T> {
    pub model: CfModel<T>,
    pub plan: TrainPlan,
    pub stages: Vec<Stage>,
    /// Index of the stage in progress; `stages.len()` when finished.
    pub stage: usize,
    /// Epochs completed in the current stage.
    pub stage_epoch: usize,
    /// Epochs completed overall.
    pub epoch: usize,
    pub net_opt: OptimizerState<T>,
    pub input_opt: OptimizerState<T>,
    pub shuffle_rng: ChaCha8Rng,
    pub negative_rng: ChaCha8Rng,
    pub history: Vec<EpochRecord>,
    pub best: Option<BestPoint<T>>,
    pub stale_epochs: usize,
    /// Early stopping ended the current stage.
    pub stop_stage: bool,
    pub guard: Option<GuardPoint<T>>,
}

impl<T: Real> TrainState<T> {
    pub fn finished(&self) -> bool {
        self.stage >= self.stages.len()
    }

    pub fn last_record(&self) -> Option<&EpochRecord> {
        self.history.last()
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<T> {
    pub model: CfModel<T>,
    pub history: Vec<EpochRecord>,
}

struct Losses {
    train_loss: f64,
    train_rmse: Option<f64>,
    val_loss: Option<f64>,
    val_rmse: Option<f64>,
}

/// `(user, item, target)` samples.
type Samples = Vec<(u32, u32, f64)>;

/// Drives a [`TrainState`] one epoch at a time.
pub struct Trainer<'a, T> {
    state: TrainState<T>,
    data: TrainData<'a>,
    /// Fixed negatives for the bce loss report.
    train_probe: Samples,
    val_probe: Samples,
}

fn check_compatible<T: Real>(model: &CfModel<T>, data: &TrainData<'_>, plan: &TrainPlan, stages: &[Stage]) -> Result<()> {
    plan.validate()?;
    let train = data.train;
    if (train.num_users(), train.num_items()) != (model.num_users(), model.num_items()) {
        return Err(Error::Config(format!(
            "model is {}x{} but the training matrix is {}x{}",
            model.num_users(),
            model.num_items(),
            train.num_users(),
            train.num_items()
        )));
    }
    if model.pattern().nnz() != train.nnz() {
        return Err(Error::Config(
            "model inputs were built from a different training matrix".into(),
        ));
    }
    if let Some(v) = data.validation {
        if (v.num_users(), v.num_items()) != (train.num_users(), train.num_items()) {
            return Err(Error::Config("validation matrix dimensions differ from train".into()));
        }
    }
    if plan.loss == LossKind::Bce {
        if train.entries().iter().any(|e| e.value != 1.0) {
            return Err(Error::Config(
                "bce needs implicit targets; convert the ratings to implicit feedback first".into(),
            ));
        }
        if model.config().output_activation != Activation::Sigmoid {
            return Err(Error::Config("bce needs a sigmoid output activation".into()));
        }
    }
    let input_only = stages
        .iter()
        .any(|s| matches!(s.phase, Phase::Inputs | Phase::Post) && s.epochs > 0);
    if input_only && !model.learnable_inputs() {
        return Err(Error::Config(format!(
            "{} has no learnable inputs to optimize",
            model.variant()
        )));
    }
    Ok(())
}

fn probe<R: rand::Rng>(
    positives: &InteractionMatrix,
    exclude: &InteractionMatrix,
    per_positive: usize,
    rng: &mut R,
) -> Result<Samples> {
    let mut out = Vec::with_capacity(positives.nnz() * (1 + per_positive));
    for e in positives.entries() {
        out.push((e.user, e.item, 1.0));
        for k in sample_negatives_with(exclude, e.user as usize, per_positive, rng)? {
            out.push((e.user, k, 0.0));
        }
    }
    Ok(out)
}

impl<'a, T: Real> Trainer<'a, T> {
    /// Fresh run over the plan's full schedule.
    pub fn new(model: CfModel<T>, data: TrainData<'a>, plan: &TrainPlan) -> Result<Self> {
        Self::with_stages(model, data, plan, plan.stages())
    }

    pub fn with_stages(model: CfModel<T>, data: TrainData<'a>, plan: &TrainPlan, stages: Vec<Stage>) -> Result<Self> {
        check_compatible(&model, &data, plan, &stages)?;
        let state = TrainState {
            model,
            plan: plan.clone(),
            stages,
            stage: 0,
            stage_epoch: 0,
            epoch: 0,
            net_opt: OptimizerState::new(),
            input_opt: OptimizerState::new(),
            shuffle_rng: rng::stream(plan.seed, Stream::Shuffle),
            negative_rng: rng::stream(plan.seed, Stream::Negatives),
            history: Vec::new(),
            best: None,
            stale_epochs: 0,
            stop_stage: false,
            guard: None,
        };
        let mut trainer = Self::attach(state, data)?;
        let losses = trainer.evaluate()?;
        trainer.state.history.push(trainer.record(Phase::Init, losses, None));
        Ok(trainer)
    }

    /// Continues a saved state against the same data.
    pub fn resume(state: TrainState<T>, data: TrainData<'a>) -> Result<Self> {
        check_compatible(&state.model, &data, &state.plan, &state.stages)?;
        Self::attach(state, data)
    }

    fn attach(state: TrainState<T>, data: TrainData<'a>) -> Result<Self> {
        let (train_probe, val_probe) = if state.plan.loss == LossKind::Bce {
            let mut rng = rng::stream(state.plan.seed, Stream::LossProbe);
            let per = state.plan.negatives_per_positive;
            let train_probe = probe(data.train, data.train, per, &mut rng)?;
            let val_probe = match data.validation {
                Some(v) => probe(v, &data.train.union(v)?, per, &mut rng)?,
                None => Vec::new(),
            };
            (train_probe, val_probe)
        } else {
            (Vec::new(), Vec::new())
        };
        Ok(Self {
            state,
            data,
            train_probe,
            val_probe,
        })
    }

    pub fn state(&self) -> &TrainState<T> {
        &self.state
    }

    pub fn into_state(self) -> TrainState<T> {
        self.state
    }

    pub fn into_outcome(self) -> TrainOutcome<T> {
        TrainOutcome {
            model: self.state.model,
            history: self.state.history,
        }
    }

    /// Runs every remaining stage.
    pub fn run(mut self) -> Result<TrainOutcome<T>> {
        while self.step()? {}
        Ok(self.into_outcome())
    }

    /// Advances by one epoch (finishing the stage if it is complete).
    /// Returns whether work remains.
    pub fn step(&mut self) -> Result<bool> {
        while !self.state.finished() {
            let stage = self.state.stages[self.state.stage];
            if self.state.stage_epoch == 0 && !self.state.stop_stage {
                self.begin_stage(stage);
            }
            if self.state.stage_epoch < stage.epochs && !self.state.stop_stage {
                self.run_epoch(stage.phase)?;
                if self.state.stage_epoch >= stage.epochs || self.state.stop_stage {
                    self.end_stage(stage)?;
                }
                return Ok(!self.state.finished());
            }
            self.end_stage(stage)?;
        }
        Ok(false)
    }

    fn begin_stage(&mut self, stage: Stage) {
        let s = &mut self.state;
        match stage.phase {
            Phase::Joint => {
                s.best = None;
                s.stale_epochs = 0;
            }
            Phase::Post => s.input_opt = OptimizerState::new(),
            Phase::Theta | Phase::Inputs => {
                s.guard = Some(GuardPoint {
                    record: s.history.last().cloned().expect("init record"),
                    snapshot: Snapshot::capture(&s.model),
                    net_opt: s.net_opt.clone(),
                    input_opt: s.input_opt.clone(),
                });
            }
            Phase::Init => {}
        }
        debug!("stage {} ({}) starts", s.stage, stage.phase.name());
    }

    fn end_stage(&mut self, stage: Stage) -> Result<()> {
        let s = &mut self.state;
        match stage.phase {
            Phase::Joint => {
                if s.plan.early_stop_patience.is_some() {
                    if let Some(best) = s.best.take() {
                        if best.record.epoch != s.epoch {
                            info!("restoring parameters from epoch {}", best.record.epoch);
                        }
                        best.snapshot.restore(&mut s.model);
                    }
                }
            }
            Phase::Theta | Phase::Inputs => {
                if let Some(guard) = s.guard.take() {
                    if stage.epochs > 0 {
                        let last = s.history.last().cloned().expect("epoch record");
                        let accepted = last.train_loss <= guard.record.train_loss;
                        let kept = if accepted {
                            last
                        } else {
                            info!(
                                "{} phase raised training loss {} -> {}; rolled back",
                                stage.phase.name(),
                                guard.record.train_loss,
                                last.train_loss
                            );
                            guard.snapshot.restore(&mut s.model);
                            s.net_opt = guard.net_opt;
                            s.input_opt = guard.input_opt;
                            guard.record
                        };
                        s.history.push(EpochRecord {
                            epoch: s.epoch,
                            phase: stage.phase,
                            accepted: Some(accepted),
                            ..kept
                        });
                    }
                }
            }
            Phase::Post | Phase::Init => {}
        }
        s.stage += 1;
        s.stage_epoch = 0;
        s.stop_stage = false;
        Ok(())
    }

    fn samples(&mut self) -> Result<Samples> {
        let s = &mut self.state;
        let train = self.data.train;
        let mut out: Samples = Vec::new();
        match s.plan.loss {
            LossKind::Mse => {
                out.extend(train.entries().iter().map(|e| (e.user, e.item, e.value)));
            }
            LossKind::Bce => {
                let per = s.plan.negatives_per_positive;
                out.reserve(train.nnz() * (1 + per));
                for e in train.entries() {
                    out.push((e.user, e.item, 1.0));
                    for k in sample_negatives_with(train, e.user as usize, per, &mut s.negative_rng)? {
                        out.push((e.user, k, 0.0));
                    }
                }
            }
        }
        out.shuffle(&mut s.shuffle_rng);
        Ok(out)
    }

    fn run_epoch(&mut self, phase: Phase) -> Result<()> {
        let samples = self.samples()?;
        let s = &mut self.state;
        let update_network = phase.updates_network();
        let update_inputs = phase.updates_inputs() && s.model.learnable_inputs();
        let net_config = s.plan.optimizer;
        let input_config = match (phase, s.plan.schedule) {
            (Phase::Post, super::Schedule::JointThenPostInput { post_lr, .. }) => OptimizerConfig::sgd(post_lr),
            _ => s.plan.input_optimizer(),
        };
        let decay: Vec<bool> = s.model.network().tensor_infos().iter().map(|t| t.decay).collect();
        let mut grads = s.model.zero_gradients_with(update_inputs);
        let loss = s.plan.loss;

        for batch in samples.chunks(s.plan.batch_size) {
            grads.zero();
            let scale = T::one() / T::lit(batch.len() as f64);
            let mut batch_loss = T::zero();
            for &(j, k, y) in batch {
                let (score, tape) = s.model.forward_pair(j as usize, k as usize)?;
                let (l, dl) = loss.eval(T::lit(y), score);
                batch_loss += l;
                s.model.backward_pair(&tape, dl * scale, &mut grads)?;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite batch loss in epoch {}",
                    s.epoch + 1
                )));
            }
            if update_network {
                let mut params = s.model.network_mut().tensors_mut();
                optimizer_step(&net_config, &mut params, &grads.network.tensors(), &decay, &mut s.net_opt)?;
            }
            if update_inputs {
                let inputs = s.model.inputs_mut();
                optimizer_step(
                    &input_config,
                    &mut [inputs.u.as_mut_slice(), inputs.v.as_mut_slice()],
                    &[&grads.u, &grads.v],
                    &[true, true],
                    &mut s.input_opt,
                )?;
            }
        }
        s.stage_epoch += 1;
        s.epoch += 1;

        let losses = self.evaluate()?;
        if !losses.train_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss diverged in epoch {}",
                self.state.epoch
            )));
        }
        let record = self.record(phase, losses, None);
        info!(
            "epoch {} [{}] train_loss {:.6} val {}",
            record.epoch,
            phase.name(),
            record.train_loss,
            record.val_rmse.or(record.val_loss).map_or("-".into(), |v| format!("{v:.6}"))
        );
        if phase == Phase::Joint {
            self.track_best(&record);
        }
        self.state.history.push(record);
        Ok(())
    }

    fn track_best(&mut self, record: &EpochRecord) {
        let s = &mut self.state;
        let Some(patience) = s.plan.early_stop_patience else {
            return;
        };
        let Some(score) = record.val_rmse.or(record.val_loss) else {
            return;
        };
        let improved = s.best.as_ref().is_none_or(|b| score < b.score);
        if improved {
            s.best = Some(BestPoint {
                score,
                record: record.clone(),
                snapshot: Snapshot::capture(&s.model),
            });
            s.stale_epochs = 0;
        } else {
            s.stale_epochs += 1;
            if s.stale_epochs >= patience {
                info!("early stop after {} epochs without improvement", s.stale_epochs);
                s.stop_stage = true;
            }
        }
    }

    fn record(&self, phase: Phase, l: Losses, accepted: Option<bool>) -> EpochRecord {
        EpochRecord {
            epoch: self.state.epoch,
            phase,
            train_loss: l.train_loss,
            train_rmse: l.train_rmse,
            val_loss: l.val_loss,
            val_rmse: l.val_rmse,
            accepted,
        }
    }

    fn evaluate(&self) -> Result<Losses> {
        let h = self.state.model.export_hypothesis()?;
        match self.state.plan.loss {
            LossKind::Mse => {
                let train_loss = mean_squared_error(&h, self.data.train)?;
                let val_loss = self.data.validation.map(|v| mean_squared_error(&h, v)).transpose()?;
                Ok(Losses {
                    train_loss,
                    train_rmse: Some(train_loss.sqrt()),
                    val_loss,
                    val_rmse: val_loss.map(f64::sqrt),
                })
            }
            LossKind::Bce => {
                let train_loss = mean_bce(&h, &self.train_probe)?;
                let val_loss = if self.val_probe.is_empty() {
                    None
                } else {
                    Some(mean_bce(&h, &self.val_probe)?)
                };
                Ok(Losses {
                    train_loss,
                    train_rmse: None,
                    val_loss,
                    val_rmse: None,
                })
            }
        }
    }
}

/// Mean of `(r - r̂)²` over every entry of `matrix`.
pub fn mean_squared_error<T: Real>(h: &Hypothesis<T>, matrix: &InteractionMatrix) -> Result<f64> {
    if matrix.is_empty() {
        return Err(Error::Data("no entries to evaluate".into()));
    }
    let mut sum = 0.0;
    for e in matrix.entries() {
        let diff = h.score(e.user as usize, e.item as usize)?.as_f64() - e.value;
        sum += diff * diff;
    }
    Ok(sum / matrix.nnz() as f64)
}

fn mean_bce<T: Real>(h: &Hypothesis<T>, samples: &[(u32, u32, f64)]) -> Result<f64> {
    let mut sum = 0.0;
    for &(j, k, y) in samples {
        let p = h.score(j as usize, k as usize)?.as_f64();
        sum += super::loss_bce(y, p).0;
    }
    Ok(sum / samples.len() as f64)
}

/// Full schedule from `plan`.
pub fn train<T: Real>(model: CfModel<T>, data: TrainData<'_>, plan: &TrainPlan) -> Result<TrainOutcome<T>> {
    Trainer::new(model, data, plan)?.run()
}

/// Joint training for `plan.max_epochs`, whatever the plan's schedule.
pub fn train_joint<T: Real>(model: CfModel<T>, data: TrainData<'_>, plan: &TrainPlan) -> Result<TrainOutcome<T>> {
    let stages = vec![Stage {
        phase: Phase::Joint,
        epochs: plan.max_epochs,
    }];
    Trainer::with_stages(model, data, plan, stages)?.run()
}

pub fn train_alternating<T: Real>(model: CfModel<T>, data: TrainData<'_>, plan: &TrainPlan) -> Result<TrainOutcome<T>> {
    if !matches!(plan.schedule, super::Schedule::Alternating { .. }) {
        return Err(Error::Config("train_alternating needs an alternating schedule".into()));
    }
    if !model.learnable_inputs() {
        return Err(Error::Config(format!("{} has no learnable inputs", model.variant())));
    }
    Trainer::new(model, data, plan)?.run()
}

/// Input-only phase on an already trained model.
pub fn train_post_input<T: Real>(model: CfModel<T>, data: TrainData<'_>, plan: &TrainPlan) -> Result<TrainOutcome<T>> {
    let super::Schedule::JointThenPostInput { post_epochs, .. } = plan.schedule else {
        return Err(Error::Config("train_post_input needs a joint-then-post-input schedule".into()));
    };
    let stages = vec![Stage {
        phase: Phase::Post,
        epochs: post_epochs,
    }];
    Trainer::with_stages(model, data, plan, stages)?.run()
}

/// Schema version of the history CSV; bump when columns change.
pub const HISTORY_SCHEMA_VERSION: u32 = 1;
pub const HISTORY_COLUMNS: [&str; 7] = [
    "epoch",
    "phase",
    "train_loss",
    "train_rmse",
    "val_loss",
    "val_rmse",
    "accepted",
];

/// History rows as CSV text with a fixed header.
pub fn history_csv(history: &[EpochRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(HISTORY_COLUMNS)?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:.9}"));
    for r in history {
        w.write_record([
            r.epoch.to_string(),
            r.phase.name().to_string(),
            format!("{:.9}", r.train_loss),
            opt(r.train_rmse),
            opt(r.val_loss),
            opt(r.val_rmse),
            r.accepted.map_or(String::new(), |a| a.to_string()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::io("history csv", e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
