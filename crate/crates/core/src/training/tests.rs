use std::collections::BTreeMap;

use super::*;
use crate::data::{synthetic_low_rank, Interaction, InteractionMatrix};
use crate::model::{CfModel, ModelConfig, Variant};
use crate::numerics::Activation;

fn small_config(variant: Variant) -> ModelConfig {
    ModelConfig::towers(variant, vec![8], vec![8], vec![8, 1])
}

fn plan(optimizer: OptimizerConfig, epochs: usize) -> TrainPlan {
    let mut p = TrainPlan::new(LossKind::Mse, optimizer, epochs, 11);
    p.batch_size = 32;
    p.early_stop_patience = None;
    p
}

fn model(variant: Variant, matrix: &InteractionMatrix) -> CfModel<f64> {
    CfModel::new(small_config(variant), matrix, 5.0, 3).unwrap()
}

fn final_loss(history: &[EpochRecord]) -> f64 {
    history.last().unwrap().train_loss
}

#[test]
fn zero_learning_rate_keeps_parameters() {
    let m = synthetic_low_rank(10, 12, 2, 0.3, 1);
    let start = model(Variant::InpNcf, &m);
    let out = train(start.clone(), TrainData::new(&m, None), &plan(OptimizerConfig::adam(0.0), 3)).unwrap();
    assert_eq!(out.model.network(), start.network());
    assert_eq!(out.model.inputs().u, start.inputs().u);
    let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(losses.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn single_rating_is_memorized() {
    let m = InteractionMatrix::from_entries(1, 1, vec![Interaction::new(0, 0, 4.0)]).unwrap();
    let out = train(model(Variant::Ncf, &m), TrainData::new(&m, None), &plan(OptimizerConfig::adam(0.01), 400)).unwrap();
    let rmse = out.history.last().unwrap().train_rmse.unwrap();
    assert!(rmse < 1e-3, "{rmse}");
}

#[test]
fn learnable_inputs_fit_at_least_as_well_jointly() {
    let m = synthetic_low_rank(50, 60, 3, 0.25, 4);
    let p = plan(OptimizerConfig::rmsprop(0.003), 30);
    let ncf = train(model(Variant::Ncf, &m), TrainData::new(&m, None), &p).unwrap();
    let inp = train(model(Variant::InpNcf, &m), TrainData::new(&m, None), &p).unwrap();
    assert!(final_loss(&inp.history) <= final_loss(&ncf.history));
}

fn alternating(rounds: usize, theta: usize, input: usize) -> TrainPlan {
    let mut p = plan(OptimizerConfig::rmsprop(0.003), theta);
    p.schedule = Schedule::Alternating {
        outer_rounds: rounds,
        inner_epochs_theta: theta,
        inner_epochs_input: input,
    };
    p
}

#[test]
fn alternating_without_input_phase_equals_fixed_input_training() {
    let m = synthetic_low_rank(30, 40, 3, 0.3, 5);
    let p = alternating(1, 6, 0);
    let alt = train_alternating(model(Variant::InpNcf, &m), TrainData::new(&m, None), &p).unwrap();
    let fixed = train_joint(model(Variant::Ncf, &m), TrainData::new(&m, None), &p).unwrap();
    assert_eq!(alt.model.network(), fixed.model.network());
    assert_eq!(final_loss(&alt.history), final_loss(&fixed.history));
}

fn boundary_losses(history: &[EpochRecord]) -> Vec<f64> {
    history
        .iter()
        .filter(|r| r.phase == Phase::Init || r.accepted.is_some())
        .map(|r| r.train_loss)
        .collect()
}

#[test]
fn phase_boundaries_never_increase_loss() {
    let m = synthetic_low_rank(30, 40, 3, 0.3, 6);
    // a large input learning rate provokes rejected phases
    let mut p = alternating(4, 2, 2);
    p.input_optimizer = Some(OptimizerConfig::sgd(50.0));
    let out = train_alternating(model(Variant::InpNcf, &m), TrainData::new(&m, None), &p).unwrap();
    let b = boundary_losses(&out.history);
    assert_eq!(b.len(), 1 + 8);
    assert!(b.windows(2).all(|w| w[1] <= w[0]), "{b:?}");
    let final_model_loss = {
        let h = out.model.export_hypothesis().unwrap();
        mean_squared_error(&h, &m).unwrap()
    };
    assert_eq!(final_model_loss, *b.last().unwrap());
}

#[test]
fn input_phase_descends_with_small_steps() {
    let m = synthetic_low_rank(20, 25, 2, 0.3, 7);
    let mut p = alternating(1, 3, 1);
    p.batch_size = m.nnz();
    p.input_optimizer = Some(OptimizerConfig::sgd(0.01));
    let out = train_alternating(model(Variant::InpNcf, &m), TrainData::new(&m, None), &p).unwrap();
    let b: Vec<&EpochRecord> = out.history.iter().filter(|r| r.accepted.is_some()).collect();
    assert_eq!(b.len(), 2);
    assert!(b[1].train_loss < b[0].train_loss);
    assert_eq!(b[1].accepted, Some(true));
}

fn post_plan(epochs: usize) -> TrainPlan {
    let mut p = plan(OptimizerConfig::rmsprop(0.003), 5);
    p.schedule = Schedule::JointThenPostInput {
        post_lr: 0.1,
        post_epochs: epochs,
    };
    p
}

#[test]
fn post_phase_freezes_network() {
    let m = synthetic_low_rank(20, 25, 2, 0.3, 8);
    let trained = train_joint(model(Variant::InpNcf, &m), TrainData::new(&m, None), &post_plan(3)).unwrap().model;
    let untouched = train_post_input(trained.clone(), TrainData::new(&m, None), &post_plan(0)).unwrap();
    assert_eq!(untouched.model, trained);
    let post = train_post_input(trained.clone(), TrainData::new(&m, None), &post_plan(3)).unwrap();
    assert_eq!(post.model.network(), trained.network());
    assert_ne!(post.model.inputs().u, trained.inputs().u);
    assert_eq!(post.history.iter().filter(|r| r.phase == Phase::Post).count(), 3);
    assert!(train_post_input(trained, TrainData::new(&m, None), &plan(OptimizerConfig::sgd(0.1), 1)).is_err());
}

#[test]
fn post_phase_needs_learnable_inputs() {
    let m = synthetic_low_rank(10, 10, 2, 0.3, 8);
    assert!(matches!(
        train_post_input(model(Variant::Ncf, &m), TrainData::new(&m, None), &post_plan(2)),
        Err(crate::Error::Config(_))
    ));
}

#[test]
fn early_stopping_restores_best_validation_point() {
    let m = synthetic_low_rank(30, 40, 3, 0.4, 9);
    let split = crate::data::split_random(&m, [0.7, 0.3, 0.0], 1).unwrap();
    let mut p = plan(OptimizerConfig::adam(0.05), 40);
    p.early_stop_patience = Some(2);
    let out = train(model(Variant::InpNcf, &split.train), TrainData::new(&split.train, Some(&split.validation)), &p).unwrap();
    let best = out
        .history
        .iter()
        .filter(|r| r.phase == Phase::Joint)
        .map(|r| r.val_rmse.unwrap())
        .fold(f64::INFINITY, f64::min);
    let h = out.model.export_hypothesis().unwrap();
    let val = mean_squared_error(&h, &split.validation).unwrap().sqrt();
    assert_eq!(val, best);
}

#[test]
fn identical_seeds_give_identical_histories() {
    let m = synthetic_low_rank(20, 30, 2, 0.3, 10);
    let p = plan(OptimizerConfig::adam(0.01), 3);
    let a = train(model(Variant::InpNcf, &m), TrainData::new(&m, None), &p).unwrap();
    let b = train(model(Variant::InpNcf, &m), TrainData::new(&m, None), &p).unwrap();
    assert_eq!(history_csv(&a.history).unwrap(), history_csv(&b.history).unwrap());
}

fn implicit_setup() -> (InteractionMatrix, CfModel<f64>, TrainPlan) {
    let m = synthetic_low_rank(15, 30, 2, 0.2, 12).to_implicit();
    let mut c = small_config(Variant::InpNcf);
    c.output_activation = Activation::Sigmoid;
    c.input_init = crate::data::InputMode::Implicit;
    let model = CfModel::new(c, &m, 1.0, 2).unwrap();
    let mut p = plan(OptimizerConfig::adam(0.01), 3);
    p.loss = LossKind::Bce;
    (m, model, p)
}

#[test]
fn bce_training_runs_and_learns() {
    let (m, model, p) = implicit_setup();
    let out = train(model, TrainData::new(&m, None), &p).unwrap();
    let losses: Vec<f64> = out.history.iter().map(|r| r.train_loss).collect();
    assert!(losses.last().unwrap() < &losses[0], "{losses:?}");
    let h = out.model.export_hypothesis().unwrap();
    for j in 0..m.num_users() {
        for s in h.score_all(j).unwrap() {
            assert!(s > 0.0 && s < 1.0);
        }
    }
}

#[test]
fn bce_rejects_explicit_ratings() {
    let m = synthetic_low_rank(10, 10, 2, 0.3, 1);
    let mut c = small_config(Variant::Ncf);
    c.output_activation = Activation::Sigmoid;
    let mut p = plan(OptimizerConfig::adam(0.01), 1);
    p.loss = LossKind::Bce;
    assert!(train(CfModel::<f64>::new(c, &m, 5.0, 0).unwrap(), TrainData::new(&m, None), &p).is_err());
}

#[test]
fn checkpoint_round_trip_is_byte_identical() {
    let m = synthetic_low_rank(12, 15, 2, 0.3, 13);
    let mut trainer = Trainer::new(model(Variant::InpNcf, &m), TrainData::new(&m, None), &alternating(2, 2, 1)).unwrap();
    for _ in 0..3 {
        trainer.step().unwrap();
    }
    let meta = BTreeMap::from([("ids".to_string(), "abc".to_string())]);
    let bytes = checkpoint_to_bytes(trainer.state(), &meta).unwrap();
    let (state, meta2) = checkpoint_from_bytes::<f64>(&bytes).unwrap();
    assert_eq!(meta2, meta);
    assert_eq!(state.model, trainer.state().model);
    assert_eq!(checkpoint_to_bytes(&state, &meta2).unwrap(), bytes);
}

#[test]
fn damaged_checkpoints_are_rejected() {
    let m = synthetic_low_rank(8, 9, 2, 0.3, 14);
    let trainer = Trainer::new(model(Variant::InpNcf, &m), TrainData::new(&m, None), &plan(OptimizerConfig::sgd(0.1), 1)).unwrap();
    let bytes = checkpoint_to_bytes(trainer.state(), &BTreeMap::new()).unwrap();
    for cut in [0, 4, 8, 20, bytes.len() - 1] {
        assert!(matches!(
            checkpoint_from_bytes::<f64>(&bytes[..cut]),
            Err(crate::Error::Checkpoint(_))
        ));
    }
    assert!(checkpoint_from_bytes::<f32>(&bytes).is_err());
    let json_len = u64::from_le_bytes(bytes[..8].try_into().unwrap()) as usize;
    let mut versioned = bytes[..8].to_vec();
    let manifest = String::from_utf8(bytes[8..8 + json_len].to_vec()).unwrap();
    versioned.extend(manifest.replace("\"format_version\":1", "\"format_version\":9").bytes());
    versioned.extend_from_slice(&bytes[8 + json_len..]);
    let err = checkpoint_from_bytes::<f64>(&versioned).unwrap_err().to_string();
    assert!(err.contains("version"), "{err}");
}

fn resume_matches(p: TrainPlan, split_after: usize, m: &InteractionMatrix, variant: Variant) {
    let data = TrainData::new(m, None);
    let full = Trainer::new(model(variant, m), data, &p).unwrap().run().unwrap();

    let mut first = Trainer::new(model(variant, m), data, &p).unwrap();
    for _ in 0..split_after {
        first.step().unwrap();
    }
    let bytes = checkpoint_to_bytes(first.state(), &BTreeMap::new()).unwrap();
    drop(first);
    let (state, _) = checkpoint_from_bytes::<f64>(&bytes).unwrap();
    let resumed = Trainer::resume(state, data).unwrap().run().unwrap();
    assert_eq!(resumed.history, full.history);
    assert_eq!(resumed.model, full.model);
}

#[test]
fn resumed_training_matches_uninterrupted() {
    let m = synthetic_low_rank(15, 20, 2, 0.3, 15);
    let mut joint = plan(OptimizerConfig::adam(0.01), 4);
    joint.early_stop_patience = Some(2);
    resume_matches(joint, 2, &m, Variant::InpNcf);
    resume_matches(alternating(2, 2, 2), 3, &m, Variant::InpNcf);
    resume_matches(post_plan(3), 6, &m, Variant::InpNcf);

    let (mi, _, mut bce) = implicit_setup();
    bce.max_epochs = 3;
    let data = TrainData::new(&mi, None);
    let fresh = || implicit_setup().1;
    let full = Trainer::new(fresh(), data, &bce).unwrap().run().unwrap();
    let mut t = Trainer::new(fresh(), data, &bce).unwrap();
    t.step().unwrap();
    let (state, _) = checkpoint_from_bytes::<f64>(&checkpoint_to_bytes(t.state(), &BTreeMap::new()).unwrap()).unwrap();
    let resumed = Trainer::resume(state, data).unwrap().run().unwrap();
    assert_eq!(resumed.history, full.history);
}
