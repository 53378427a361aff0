use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};

use super::config::{validate_ratios, RunConfig};
use crate::data::{
    id_fingerprint, ingest, read_entries, split_leave_one_out, split_random, write_entries, Dataset, Format, IdMap,
    IngestOptions, InteractionMatrix, SplitBundle, SplitFiles, SplitProtocol,
};
use crate::error::{Error, Result};
use crate::metrics::{evaluate, EvalReport, EvalSettings, Metric};
use crate::model::{theoretical_param_count, CfModel, TensorInfo};
use crate::training::{checkpoint_load, checkpoint_save, history_csv, EpochRecord, TrainData, TrainState, Trainer};

pub const CHECKPOINT_FILE: &str = "checkpoint.bin";
pub const BEST_MODEL_FILE: &str = "best_model.bin";
pub const HISTORY_FILE: &str = "history.csv";

const META_FINGERPRINT: &str = "id_fingerprint";
const META_RUN_CONFIG: &str = "run_config";

/// Contents of `split.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitManifest {
    pub source: String,
    pub protocol: SplitProtocol,
    pub ratios: Option<[f64; 3]>,
    pub seed: u64,
    pub users: usize,
    pub items: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub id_fingerprint: String,
}

/// A split together with the id maps it was densified with.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub split: SplitBundle,
    pub users: IdMap,
    pub items: IdMap,
}

impl PreparedData {
    pub fn fingerprint(&self) -> String {
        id_fingerprint(&self.users, &self.items)
    }

    /// Every known interaction across the three parts.
    pub fn observed(&self) -> Result<InteractionMatrix> {
        self.split.all()
    }
}

fn make_split(dataset: &Dataset, protocol: SplitProtocol, ratios: [f64; 3], seed: u64) -> Result<SplitBundle> {
    match protocol {
        SplitProtocol::RandomRatio => {
            validate_ratios(ratios)?;
            split_random(&dataset.matrix, ratios, seed)
        }
        SplitProtocol::LeaveOneOut => split_leave_one_out(&dataset.matrix),
    }
}

fn load_dataset(path: &Path, format: Format, implicit: bool) -> Result<Dataset> {
    let mut dataset = ingest(path, format, IngestOptions::default())?;
    if implicit {
        dataset.matrix = dataset.matrix.to_implicit();
    }
    Ok(dataset)
}

fn write_split(dir: &Path, data: &PreparedData, source: &str, ratios: Option<[f64; 3]>) -> Result<SplitManifest> {
    create_dir(dir)?;
    let files = SplitFiles::in_dir(dir);
    let s = &data.split;
    write_entries(&files.train, &s.train)?;
    write_entries(&files.validation, &s.validation)?;
    write_entries(&files.test, &s.test)?;
    data.users.write(&files.users)?;
    data.items.write(&files.items)?;
    let (train, validation, test) = s.counts();
    let manifest = SplitManifest {
        source: source.into(),
        protocol: s.protocol,
        ratios,
        seed: s.seed,
        users: s.train.num_users(),
        items: s.train.num_items(),
        train,
        validation,
        test,
        id_fingerprint: data.fingerprint(),
    };
    write_text(&files.manifest, serde_json::to_string_pretty(&manifest)?)?;
    Ok(manifest)
}

/// Reads a directory written by [`cmd_split`].
pub fn load_split(dir: &Path) -> Result<(PreparedData, SplitManifest)> {
    let files = SplitFiles::in_dir(dir);
    let manifest: SplitManifest = serde_json::from_str(&read_text(&files.manifest)?)?;
    let users = IdMap::read(&files.users)?;
    let items = IdMap::read(&files.items)?;
    if users.len() != manifest.users || items.len() != manifest.items {
        return Err(Error::Data(format!("{}: id maps disagree with split.json", dir.display())));
    }
    if id_fingerprint(&users, &items) != manifest.id_fingerprint {
        return Err(Error::Data(format!("{}: id map fingerprint mismatch", dir.display())));
    }
    let read = |p: &Path| read_entries(p, manifest.users, manifest.items);
    let split = SplitBundle {
        train: read(&files.train)?,
        validation: read(&files.validation)?,
        test: read(&files.test)?,
        protocol: manifest.protocol,
        seed: manifest.seed,
    };
    if split.counts() != (manifest.train, manifest.validation, manifest.test) {
        return Err(Error::Data(format!("{}: entry counts disagree with split.json", dir.display())));
    }
    Ok((PreparedData { split, users, items }, manifest))
}

/// Loads the configured dataset and splits it, or reads a prepared split
/// directory.
pub fn prepare_data(config: &RunConfig) -> Result<PreparedData> {
    let d = &config.dataset;
    if d.path.is_dir() {
        let (mut data, _) = load_split(&d.path)?;
        if d.implicit {
            let s = &mut data.split;
            s.train = s.train.to_implicit();
            s.validation = s.validation.to_implicit();
            s.test = s.test.to_implicit();
        }
        return Ok(data);
    }
    let dataset = load_dataset(&d.path, d.format, d.implicit)?;
    let split = make_split(&dataset, config.split.protocol, config.split.ratios, config.split.seed)?;
    Ok(PreparedData {
        split,
        users: dataset.users,
        items: dataset.items,
    })
}

pub struct SplitRequest<'a> {
    pub input: &'a Path,
    pub format: Format,
    pub protocol: SplitProtocol,
    pub ratios: [f64; 3],
    pub seed: u64,
    pub implicit: bool,
    pub out: &'a Path,
}

/// Splits a rating file into train / validation / test entry files plus id
/// maps and a manifest.
pub fn cmd_split(req: &SplitRequest<'_>) -> Result<SplitManifest> {
    let dataset = load_dataset(req.input, req.format, req.implicit)?;
    let split = make_split(&dataset, req.protocol, req.ratios, req.seed)?;
    let data = PreparedData {
        split,
        users: dataset.users,
        items: dataset.items,
    };
    let ratios = (req.protocol == SplitProtocol::RandomRatio).then_some(req.ratios);
    write_split(req.out, &data, &req.input.display().to_string(), ratios)
}

/// Where a training run starts and how far it may go.
#[derive(Debug, Clone, Default)]
pub struct TrainOptions {
    /// Continue from this checkpoint instead of a fresh model.
    pub from_checkpoint: Option<PathBuf>,
    /// Stop after this many epochs, leaving a resumable checkpoint.
    pub stop_after: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub history: Vec<EpochRecord>,
    /// Test-set report; absent when the run stopped before finishing.
    pub report: Option<EvalReport>,
    pub output_dir: PathBuf,
}

/// Runs the configured schedule, checkpointing after every epoch, then
/// evaluates the final model on the test part.
pub fn cmd_train(config: &RunConfig, options: &TrainOptions) -> Result<TrainSummary> {
    let out = &config.output_dir;
    create_dir(out)?;
    write_text(&out.join("config.json"), config.to_json()?)?;
    let data = prepare_data(config)?;
    let ratios = (data.split.protocol == SplitProtocol::RandomRatio).then_some(config.split.ratios);
    write_split(&out.join("split"), &data, &config.dataset.path.display().to_string(), ratios)?;
    let fingerprint = data.fingerprint();
    let s = &data.split;
    let train_data = TrainData::new(&s.train, Some(&s.validation));

    let mut trainer = match &options.from_checkpoint {
        Some(path) => {
            let (state, metadata) = checkpoint_load::<f64>(path)?;
            check_resume(config, &state, &metadata, &fingerprint)?;
            info!("resuming from {} at epoch {}", path.display(), state.epoch);
            Trainer::resume(state, train_data)?
        }
        None => {
            let model = CfModel::<f64>::new(config.model.clone(), &s.train, config.dataset.value_max, config.training.seed)?;
            Trainer::new(model, train_data, &config.training)?
        }
    };

    let metadata = BTreeMap::from([
        (META_FINGERPRINT.to_string(), fingerprint),
        (META_RUN_CONFIG.to_string(), serde_json::to_string(config)?),
    ]);
    let checkpoint = out.join(CHECKPOINT_FILE);
    let history_path = out.join(HISTORY_FILE);
    let mut steps = 0usize;
    let mut more = !trainer.state().finished();
    while more && options.stop_after.is_none_or(|limit| steps < limit) {
        more = trainer.step().map_err(|e| match e {
            Error::Numerical(msg) => Error::Numerical(format!("{msg}; last checkpoint: {}", checkpoint.display())),
            other => other,
        })?;
        steps += 1;
        checkpoint_save(trainer.state(), &metadata, &checkpoint)?;
        write_text(&history_path, history_csv(&trainer.state().history)?)?;
    }
    if more {
        info!("stopped after {steps} epochs; resume with {}", checkpoint.display());
        return Ok(TrainSummary {
            history: trainer.into_state().history,
            report: None,
            output_dir: out.clone(),
        });
    }
    checkpoint_save(trainer.state(), &metadata, &out.join(BEST_MODEL_FILE))?;

    let state = trainer.into_state();
    let h = state.model.export_hypothesis()?;
    let report = evaluate(&h, &data.observed()?, &s.test, &split_name(s.protocol), &config.eval)?;
    report.write(out)?;
    Ok(TrainSummary {
        history: state.history,
        report: Some(report),
        output_dir: out.clone(),
    })
}

fn check_resume(config: &RunConfig, state: &TrainState<f64>, metadata: &BTreeMap<String, String>, fingerprint: &str) -> Result<()> {
    if state.model.config() != &config.model || state.plan != config.training {
        return Err(Error::Config("checkpoint was written for a different model or training plan".into()));
    }
    check_fingerprint(metadata, fingerprint)
}

fn check_fingerprint(metadata: &BTreeMap<String, String>, fingerprint: &str) -> Result<()> {
    match metadata.get(META_FINGERPRINT) {
        Some(f) if f == fingerprint => Ok(()),
        Some(_) => Err(Error::Data("checkpoint and data use different id maps".into())),
        None => Err(Error::Data("checkpoint carries no id fingerprint".into())),
    }
}

fn split_name(protocol: SplitProtocol) -> String {
    match protocol {
        SplitProtocol::RandomRatio => "random-ratio".into(),
        SplitProtocol::LeaveOneOut => "leave-one-out".into(),
    }
}

/// Scores a checkpoint on the test part of a split directory.
pub fn cmd_evaluate(checkpoint: &Path, data_dir: &Path, metrics: Option<Vec<Metric>>, out: &Path) -> Result<EvalReport> {
    let (state, metadata) = checkpoint_load::<f64>(checkpoint)?;
    let (data, manifest) = load_split(data_dir)?;
    check_fingerprint(&metadata, &manifest.id_fingerprint)?;
    let model = &state.model;
    if model.num_users() != manifest.users || model.num_items() != manifest.items {
        return Err(Error::Data(format!(
            "checkpoint is {}x{}, data is {}x{}",
            model.num_users(),
            model.num_items(),
            manifest.users,
            manifest.items
        )));
    }
    let run: Option<RunConfig> = metadata.get(META_RUN_CONFIG).map(|s| serde_json::from_str(s)).transpose()?;
    let mut settings = run.map_or_else(|| EvalSettings::new(Metric::ALL.to_vec()), |r| r.eval);
    if let Some(m) = metrics {
        settings.metrics = m;
    }
    let h = model.export_hypothesis()?;
    let report = evaluate(&h, &data.observed()?, &data.split.test, &split_name(manifest.protocol), &settings)?;
    create_dir(out)?;
    report.write(out)?;
    Ok(report)
}

/// Trainable scalar counts of a configured model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSummary {
    pub variant: String,
    pub users: usize,
    pub items: usize,
    pub train_interactions: usize,
    pub network_params: usize,
    pub input_params: usize,
    /// Count of the idealized summation-fusion model with the same sizes.
    pub theoretical_params: usize,
    pub tensors: Vec<TensorInfo>,
}

impl fmt::Display for ModelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "variant            {}", self.variant)?;
        writeln!(f, "users x items      {} x {}", self.users, self.items)?;
        writeln!(f, "train interactions {}", self.train_interactions)?;
        writeln!(f, "network params     {}", self.network_params)?;
        writeln!(f, "input params       {}", self.input_params)?;
        writeln!(f, "theoretical pi     {}", self.theoretical_params)?;
        for t in &self.tensors {
            writeln!(f, "  {:<24} {:?}", t.name, t.shape)?;
        }
        Ok(())
    }
}

pub fn cmd_summary(config: &RunConfig) -> Result<ModelSummary> {
    let data = prepare_data(config)?;
    let train = &data.split.train;
    let model = CfModel::<f64>::new(config.model.clone(), train, config.dataset.value_max, config.training.seed)?;
    let counts = model.param_counts();
    let hidden = config.model.head_layers.len().saturating_sub(1);
    Ok(ModelSummary {
        variant: config.model.variant.to_string(),
        users: train.num_users(),
        items: train.num_items(),
        train_interactions: train.nnz(),
        network_params: counts.network,
        input_params: counts.inputs,
        theoretical_params: theoretical_param_count(
            train.num_users(),
            train.num_items(),
            train.distinct_values(),
            config.model.user_width(),
            hidden,
        ),
        tensors: model.network().tensor_infos(),
    })
}

/// Files written by [`cmd_inputs_dump`].
pub const USER_INPUTS_FILE: &str = "inputs_u.csv";
pub const ITEM_INPUTS_FILE: &str = "inputs_v.csv";

/// Writes one row per learnable input: `user,item,initial_value,learned_value`
/// for user vectors and `item,user,...` for item vectors. Returns the
/// number of rows per file.
pub fn cmd_inputs_dump(checkpoint: &Path, out: &Path) -> Result<usize> {
    let (state, _) = checkpoint_load::<f64>(checkpoint)?;
    let inputs = state.model.inputs();
    let pattern = inputs.pattern();
    create_dir(out)?;
    let write = |name: &str, header: [&str; 4], rows: &mut dyn Iterator<Item = (usize, u32, f64, f64)>| -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for (a, b, init, learned) in rows {
            w.write_record([a.to_string(), b.to_string(), format!("{init:.9}"), format!("{learned:.9}")])?;
        }
        let bytes = w.into_inner().map_err(|e| Error::io(name, e.into_error()))?;
        write_text(&out.join(name), String::from_utf8(bytes).expect("utf-8 csv"))
    };
    let mut user_rows = (0..pattern.num_users()).flat_map(|j| {
        pattern.user_range(j).zip(pattern.user_items(j)).map(move |(s, &k)| (j, k, s))
    });
    write(
        USER_INPUTS_FILE,
        ["user", "item", "initial_value", "learned_value"],
        &mut (&mut user_rows).map(|(j, k, s)| (j, k, inputs.u_init()[s], inputs.u[s])),
    )?;
    let mut item_rows = (0..pattern.num_items()).flat_map(|k| {
        pattern.item_range(k).zip(pattern.item_users(k)).map(move |(s, &j)| (k, j, s))
    });
    write(
        ITEM_INPUTS_FILE,
        ["item", "user", "initial_value", "learned_value"],
        &mut (&mut item_rows).map(|(k, j, s)| (k, j, inputs.v_init()[s], inputs.v[s])),
    )?;
    Ok(pattern.nnz())
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(format!("creating {}", dir.display()), e))
}

fn write_text(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))
}
