//! Single-file training archive.
//!
//! Layout: `u64` little-endian manifest length, the UTF-8 JSON manifest, then
//! the raw little-endian tensor payload. Manifest offsets are relative to the
//! start of the payload.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{BestPoint, EpochRecord, GuardPoint, OptimizerState, Snapshot, Stage, TrainPlan, TrainState};
use crate::data::{hex, InputPattern, LearnableInputSet};
use crate::error::{Error, Result};
use crate::model::{CfModel, ModelConfig, Network};
use crate::numerics::Real;
use crate::rng::RngState;

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub dtype: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct OptimizerMeta {
    steps: u64,
    first: usize,
    second: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub dtype: String,
    /// sha256 of the model config and training plan.
    pub config_hash: String,
    pub model: ModelConfig,
    pub plan: TrainPlan,
    pub users: usize,
    pub items: usize,
    pub stages: Vec<Stage>,
    pub stage: usize,
    pub stage_epoch: usize,
    pub epoch: usize,
    pub stale_epochs: usize,
    pub stop_stage: bool,
    pub shuffle_rng: RngState,
    pub negative_rng: RngState,
    net_opt: OptimizerMeta,
    input_opt: OptimizerMeta,
    guard_net_opt: Option<OptimizerMeta>,
    guard_input_opt: Option<OptimizerMeta>,
    pub history: Vec<EpochRecord>,
    pub best: Option<(f64, EpochRecord)>,
    pub guard: Option<EpochRecord>,
    /// Caller-provided labels such as the id map fingerprint.
    pub metadata: BTreeMap<String, String>,
    pub tensors: Vec<TensorEntry>,
}

/// Hash binding a checkpoint to the configuration that produced it.
pub fn config_hash(model: &ModelConfig, plan: &TrainPlan) -> Result<String> {
    let json = serde_json::to_vec(&(model, plan))?;
    Ok(hex(&Sha256::digest(&json)))
}

#[derive(Default)]
struct PayloadWriter {
    entries: Vec<TensorEntry>,
    bytes: Vec<u8>,
}

impl PayloadWriter {
    fn real<T: Real>(&mut self, name: impl Into<String>, shape: Vec<usize>, data: &[T]) {
        let offset = self.bytes.len();
        self.bytes.reserve(data.len() * T::BYTES);
        for &x in data {
            x.write_le(&mut self.bytes);
        }
        self.push(name.into(), T::DTYPE, shape, offset);
    }

    fn index(&mut self, name: &str, data: &[u32]) {
        let offset = self.bytes.len();
        for &x in data {
            self.bytes.extend_from_slice(&x.to_le_bytes());
        }
        self.push(name.into(), "u32", vec![data.len()], offset);
    }

    fn push(&mut self, name: String, dtype: &str, shape: Vec<usize>, offset: usize) {
        self.entries.push(TensorEntry {
            name,
            dtype: dtype.into(),
            shape,
            offset,
            length: self.bytes.len() - offset,
        });
    }

    fn network<T: Real>(&mut self, prefix: &str, network: &Network<T>) {
        for (info, data) in network.tensor_infos().into_iter().zip(network.tensors()) {
            self.real(format!("{prefix}/{}", info.name), info.shape, data);
        }
    }

    fn optimizer<T: Real>(&mut self, prefix: &str, state: &OptimizerState<T>) -> OptimizerMeta {
        for (i, m) in state.first.iter().enumerate() {
            self.real(format!("{prefix}/first/{i}"), vec![m.len()], m);
        }
        for (i, s) in state.second.iter().enumerate() {
            self.real(format!("{prefix}/second/{i}"), vec![s.len()], s);
        }
        OptimizerMeta {
            steps: state.steps,
            first: state.first.len(),
            second: state.second.len(),
        }
    }
}

struct PayloadReader<'a> {
    entries: BTreeMap<&'a str, &'a TensorEntry>,
    bytes: &'a [u8],
}

impl<'a> PayloadReader<'a> {
    fn new(manifest: &'a Manifest, bytes: &'a [u8]) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for e in &manifest.tensors {
            let end = e.offset.checked_add(e.length);
            if end.is_none_or(|end| end > bytes.len()) {
                return Err(Error::Checkpoint(format!(
                    "tensor {} extends past the end of the payload (truncated file?)",
                    e.name
                )));
            }
            if entries.insert(e.name.as_str(), e).is_some() {
                return Err(Error::Checkpoint(format!("duplicate tensor {}", e.name)));
            }
        }
        Ok(Self { entries, bytes })
    }

    fn entry(&self, name: &str, dtype: &str, width: usize) -> Result<&'a TensorEntry> {
        let e = self
            .entries
            .get(name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if e.dtype != dtype {
            return Err(Error::Checkpoint(format!("tensor {name} is {}, expected {dtype}", e.dtype)));
        }
        let count: usize = e.shape.iter().product();
        if e.length != count * width {
            return Err(Error::Checkpoint(format!("tensor {name} length does not match its shape")));
        }
        Ok(e)
    }

    fn real<T: Real>(&self, name: &str) -> Result<Vec<T>> {
        let e = self.entry(name, T::DTYPE, T::BYTES)?;
        Ok(self.bytes[e.offset..e.offset + e.length]
            .chunks_exact(T::BYTES)
            .map(T::read_le)
            .collect())
    }

    fn index(&self, name: &str) -> Result<Vec<u32>> {
        let e = self.entry(name, "u32", 4)?;
        Ok(self.bytes[e.offset..e.offset + e.length]
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect())
    }

    /// Fills a network shaped like `template` from `prefix/<tensor name>`.
    fn network<T: Real>(&self, prefix: &str, template: &Network<T>) -> Result<Network<T>> {
        let mut net = template.clone();
        let infos = net.tensor_infos();
        for (info, dst) in infos.iter().zip(net.tensors_mut()) {
            let name = format!("{prefix}/{}", info.name);
            let e = self.entry(&name, T::DTYPE, T::BYTES)?;
            if e.shape != info.shape {
                return Err(Error::Checkpoint(format!(
                    "tensor {name} has shape {:?}, model expects {:?}",
                    e.shape, info.shape
                )));
            }
            dst.copy_from_slice(&self.real::<T>(&name)?);
        }
        Ok(net)
    }

    fn optimizer<T: Real>(&self, prefix: &str, meta: &OptimizerMeta) -> Result<OptimizerState<T>> {
        Ok(OptimizerState {
            steps: meta.steps,
            first: (0..meta.first)
                .map(|i| self.real(&format!("{prefix}/first/{i}")))
                .collect::<Result<_>>()?,
            second: (0..meta.second)
                .map(|i| self.real(&format!("{prefix}/second/{i}")))
                .collect::<Result<_>>()?,
        })
    }

    fn snapshot<T: Real>(&self, prefix: &str, template: &Network<T>) -> Result<Snapshot<T>> {
        Ok(Snapshot {
            network: self.network(&format!("{prefix}/network"), template)?,
            u: self.real(&format!("{prefix}/u"))?,
            v: self.real(&format!("{prefix}/v"))?,
        })
    }
}

/// Serializes a training state; identical states give identical bytes.
pub fn checkpoint_to_bytes<T: Real>(state: &TrainState<T>, metadata: &BTreeMap<String, String>) -> Result<Vec<u8>> {
    let model = &state.model;
    let mut w = PayloadWriter::default();
    w.network("network", model.network());
    let inputs = model.inputs();
    let nnz = inputs.pattern().nnz();
    w.real("inputs/u", vec![nnz], &inputs.u);
    w.real("inputs/v", vec![nnz], &inputs.v);
    w.real("inputs/u_init", vec![nnz], inputs.u_init());
    w.real("inputs/v_init", vec![nnz], inputs.v_init());
    let p = inputs.pattern();
    w.index("pattern/row_ptr", p.row_ptr());
    w.index("pattern/row_items", p.row_items());
    w.index("pattern/col_ptr", p.col_ptr());
    w.index("pattern/col_users", p.col_users());
    let net_opt = w.optimizer("opt/network", &state.net_opt);
    let input_opt = w.optimizer("opt/inputs", &state.input_opt);
    if let Some(best) = &state.best {
        w.network("best/network", &best.snapshot.network);
        w.real("best/u", vec![nnz], &best.snapshot.u);
        w.real("best/v", vec![nnz], &best.snapshot.v);
    }
    let (mut guard_net_opt, mut guard_input_opt) = (None, None);
    if let Some(g) = &state.guard {
        w.network("guard/network", &g.snapshot.network);
        w.real("guard/u", vec![nnz], &g.snapshot.u);
        w.real("guard/v", vec![nnz], &g.snapshot.v);
        guard_net_opt = Some(w.optimizer("guard/opt/network", &g.net_opt));
        guard_input_opt = Some(w.optimizer("guard/opt/inputs", &g.input_opt));
    }

    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        dtype: T::DTYPE.into(),
        config_hash: config_hash(model.config(), &state.plan)?,
        model: model.config().clone(),
        plan: state.plan.clone(),
        users: model.num_users(),
        items: model.num_items(),
        stages: state.stages.clone(),
        stage: state.stage,
        stage_epoch: state.stage_epoch,
        epoch: state.epoch,
        stale_epochs: state.stale_epochs,
        stop_stage: state.stop_stage,
        shuffle_rng: RngState::capture(&state.shuffle_rng),
        negative_rng: RngState::capture(&state.negative_rng),
        net_opt,
        input_opt,
        guard_net_opt,
        guard_input_opt,
        history: state.history.clone(),
        best: state.best.as_ref().map(|b| (b.score, b.record.clone())),
        guard: state.guard.as_ref().map(|g| g.record.clone()),
        metadata: metadata.clone(),
        tensors: w.entries,
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(8 + json.len() + w.bytes.len());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&w.bytes);
    Ok(out)
}

fn split_archive(bytes: &[u8]) -> Result<(Manifest, &[u8])> {
    if bytes.len() < 8 {
        return Err(Error::Checkpoint("file too short for a manifest header".into()));
    }
    let len = u64::from_le_bytes(bytes[..8].try_into().expect("8 bytes"));
    let end = usize::try_from(len)
        .ok()
        .and_then(|l| l.checked_add(8))
        .filter(|&e| e <= bytes.len())
        .ok_or_else(|| Error::Checkpoint("manifest extends past the end of the file (truncated?)".into()))?;
    let manifest: Manifest = serde_json::from_slice(&bytes[8..end])
        .map_err(|e| Error::Checkpoint(format!("unreadable manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    let payload = &bytes[end..];
    let expected = manifest.tensors.iter().map(|t| t.offset + t.length).max().unwrap_or(0);
    if payload.len() != expected {
        return Err(Error::Checkpoint(format!(
            "payload holds {} bytes, manifest describes {expected} (truncated?)",
            payload.len()
        )));
    }
    Ok((manifest, payload))
}

/// Reads only the manifest of an archive.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    Ok(split_archive(&bytes)?.0)
}

pub fn checkpoint_from_bytes<T: Real>(bytes: &[u8]) -> Result<(TrainState<T>, BTreeMap<String, String>)> {
    let (manifest, payload) = split_archive(bytes)?;
    if manifest.dtype != T::DTYPE {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} parameters, requested {}",
            manifest.dtype,
            T::DTYPE
        )));
    }
    if config_hash(&manifest.model, &manifest.plan)? != manifest.config_hash {
        return Err(Error::Checkpoint("config hash does not match the stored configuration".into()));
    }
    let r = PayloadReader::new(&manifest, payload)?;
    let template: Network<T> = Network::init(
        &manifest.model,
        manifest.users,
        manifest.items,
        0.0,
        &mut ChaCha8Rng::seed_from_u64(0),
    )?;
    let pattern = InputPattern::from_parts(
        manifest.users,
        manifest.items,
        r.index("pattern/row_ptr")?,
        r.index("pattern/row_items")?,
        r.index("pattern/col_ptr")?,
        r.index("pattern/col_users")?,
    )
    .map_err(|e| Error::Checkpoint(e.to_string()))?;
    let inputs = LearnableInputSet::new(
        pattern,
        r.real("inputs/u")?,
        r.real("inputs/v")?,
        r.real("inputs/u_init")?,
        r.real("inputs/v_init")?,
    )?;
    let network = r.network("network", &template)?;
    let model = CfModel::from_parts(manifest.model.clone(), network, inputs)?;

    let best = match &manifest.best {
        Some((score, record)) => Some(BestPoint {
            score: *score,
            record: record.clone(),
            snapshot: r.snapshot("best", &template)?,
        }),
        None => None,
    };
    let guard = match (&manifest.guard, &manifest.guard_net_opt, &manifest.guard_input_opt) {
        (Some(record), Some(net), Some(input)) => Some(GuardPoint {
            record: record.clone(),
            snapshot: r.snapshot("guard", &template)?,
            net_opt: r.optimizer("guard/opt/network", net)?,
            input_opt: r.optimizer("guard/opt/inputs", input)?,
        }),
        (None, None, None) => None,
        _ => return Err(Error::Checkpoint("incomplete guard state".into())),
    };
    if manifest.stage > manifest.stages.len() {
        return Err(Error::Checkpoint("stage cursor outside the schedule".into()));
    }
    let state = TrainState {
        model,
        plan: manifest.plan.clone(),
        stages: manifest.stages.clone(),
        stage: manifest.stage,
        stage_epoch: manifest.stage_epoch,
        epoch: manifest.epoch,
        net_opt: r.optimizer("opt/network", &manifest.net_opt)?,
        input_opt: r.optimizer("opt/inputs", &manifest.input_opt)?,
        shuffle_rng: manifest.shuffle_rng.restore(),
        negative_rng: manifest.negative_rng.restore(),
        history: manifest.history.clone(),
        best,
        stale_epochs: manifest.stale_epochs,
        stop_stage: manifest.stop_stage,
        guard,
    };
    Ok((state, manifest.metadata))
}

/// Writes atomically via a sibling temporary file.
pub fn checkpoint_save<T: Real>(state: &TrainState<T>, metadata: &BTreeMap<String, String>, path: &Path) -> Result<()> {
    let bytes = checkpoint_to_bytes(state, metadata)?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, &bytes).map_err(|e| Error::io(format!("writing {}", tmp.display()), e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(format!("renaming to {}", path.display()), e))
}

pub fn checkpoint_load<T: Real>(path: &Path) -> Result<(TrainState<T>, BTreeMap<String, String>)> {
    let bytes = fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    checkpoint_from_bytes(&bytes)
}
