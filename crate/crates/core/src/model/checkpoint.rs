use std::fs;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::network::{InputDims, UgvqModel};
use super::train::{BestSnapshot, EpochMetrics, TrainConfig, Trainer};
use super::{FusionConfig, ModelError};
use crate::hashing::fnv1a64;
use crate::nn::{Adam, AdamState, ParamStore};

const MAGIC: &[u8; 8] = b"UGVQCKPT";
const VERSION: u32 = 1;
const MAX_HEADER: usize = 64 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Group {
    Param,
    AdamM,
    AdamV,
    Best,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorEntry {
    group: Group,
    name: String,
    rows: usize,
    cols: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Header {
    fusion: FusionConfig,
    input_dims: InputDims,
    train: TrainConfig,
    seed: u64,
    epoch: usize,
    adam_step: Option<u64>,
    best_epoch: Option<usize>,
    best_score: Option<f64>,
    history: Vec<EpochMetrics>,
    metadata: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

/// Everything needed to rebuild a model, or to resume its training exactly.
///
/// File layout: magic, `u32` version, `u32` header length, JSON header,
/// tensors as little-endian f64 in header order, FNV-1a checksum trailer.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub fusion: FusionConfig,
    pub input_dims: InputDims,
    pub train: TrainConfig,
    pub seed: u64,
    /// Next epoch to run.
    pub epoch: usize,
    pub params: ParamStore,
    pub adam: Option<AdamState>,
    pub best: Option<BestSnapshot>,
    pub history: Vec<EpochMetrics>,
    /// Free-form run information (feature configuration, split, ...).
    pub metadata: serde_json::Value,
}

impl Checkpoint {
    /// Full training state, for resuming.
    pub fn from_trainer(t: &Trainer, metadata: serde_json::Value) -> Self {
        Self {
            fusion: t.model.config().clone(),
            input_dims: t.model.input_dims(),
            train: t.config.clone(),
            seed: t.seed,
            epoch: t.epoch,
            params: t.model.params().clone(),
            adam: Some(t.adam.state.clone()),
            best: t.best.clone(),
            history: t.history.clone(),
            metadata,
        }
    }

    /// The selected model only, for inference.
    pub fn selected(t: &Trainer, metadata: serde_json::Value) -> Self {
        Self { params: t.best_model().params().clone(), adam: None, best: None, ..Self::from_trainer(t, metadata) }
    }

    pub fn model(&self) -> Result<UgvqModel, ModelError> {
        let mut m = UgvqModel::new(self.fusion.clone(), self.input_dims, self.seed)?;
        m.load_params(self.params.clone())?;
        Ok(m)
    }

    pub fn into_trainer(self) -> Result<Trainer, ModelError> {
        let model = self.model()?;
        let mut t = Trainer::new(model, self.train.clone(), self.seed)?;
        let adam_state = self.adam.ok_or_else(|| ModelError::Checkpoint("no optimiser state to resume from".into()))?;
        let matches = adam_state.m.len() == t.model.params().len()
            && t.model.params().ids().all(|id| {
                let dim = t.model.params().get(id).dim();
                adam_state.m[id.index()].dim() == dim && adam_state.v[id.index()].dim() == dim
            });
        if !matches {
            return Err(ModelError::Checkpoint("optimiser state does not match the parameters".into()));
        }
        t.adam = Adam { config: self.train.adam, state: adam_state };
        if let Some(b) = &self.best {
            t.model.clone().load_params(b.params.clone())?;
        }
        t.best = self.best;
        t.history = self.history;
        t.epoch = self.epoch;
        Ok(t)
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut tensors = Vec::new();
        let mut blobs: Vec<&Array2<f64>> = Vec::new();
        let push = |group, name: &str, a: &Array2<f64>, tensors: &mut Vec<TensorEntry>| {
            tensors.push(TensorEntry { group, name: name.to_string(), rows: a.nrows(), cols: a.ncols() });
        };
        for id in self.params.ids() {
            push(Group::Param, self.params.name(id), self.params.get(id), &mut tensors);
            blobs.push(self.params.get(id));
        }
        if let Some(a) = &self.adam {
            for (i, m) in a.m.iter().enumerate() {
                push(Group::AdamM, &i.to_string(), m, &mut tensors);
                blobs.push(m);
            }
            for (i, v) in a.v.iter().enumerate() {
                push(Group::AdamV, &i.to_string(), v, &mut tensors);
                blobs.push(v);
            }
        }
        if let Some(b) = &self.best {
            for id in b.params.ids() {
                push(Group::Best, b.params.name(id), b.params.get(id), &mut tensors);
                blobs.push(b.params.get(id));
            }
        }
        let header = Header {
            fusion: self.fusion.clone(),
            input_dims: self.input_dims,
            train: self.train.clone(),
            seed: self.seed,
            epoch: self.epoch,
            adam_step: self.adam.as_ref().map(|a| a.step),
            best_epoch: self.best.as_ref().map(|b| b.epoch),
            best_score: self.best.as_ref().and_then(|b| b.score),
            history: self.history.clone(),
            metadata: self.metadata.clone(),
            tensors,
        };
        let json = serde_json::to_vec(&header).expect("checkpoint header serialises");
        let mut out = Vec::with_capacity(16 + json.len() + blobs.iter().map(|b| b.len() * 8).sum::<usize>() + 8);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(json.len() as u32).to_le_bytes());
        out.extend_from_slice(&json);
        for b in blobs {
            for v in b.iter() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        let sum = fnv1a64(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        if bytes.len() < 24 {
            return Err(bad("truncated checkpoint"));
        }
        let (body, trailer) = bytes.split_at(bytes.len() - 8);
        if fnv1a64(body) != u64::from_le_bytes(trailer.try_into().unwrap()) {
            return Err(bad("checksum mismatch"));
        }
        if &body[..8] != MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = u32::from_le_bytes(body[8..12].try_into().unwrap());
        if version != VERSION {
            return Err(ModelError::Checkpoint(format!("unsupported checkpoint version {version}")));
        }
        let hlen = u32::from_le_bytes(body[12..16].try_into().unwrap()) as usize;
        if hlen > MAX_HEADER || 16 + hlen > body.len() {
            return Err(bad("header length out of range"));
        }
        let header: Header =
            serde_json::from_slice(&body[16..16 + hlen]).map_err(|e| ModelError::Checkpoint(format!("header: {e}")))?;
        let mut data = &body[16 + hlen..];
        let total: Option<usize> = header
            .tensors
            .iter()
            .try_fold(0usize, |acc, t| t.rows.checked_mul(t.cols).and_then(|n| acc.checked_add(n)));
        if total.and_then(|n| n.checked_mul(8)) != Some(data.len()) {
            return Err(bad("tensor table does not match the payload size"));
        }
        let mut params = ParamStore::new();
        let (mut m, mut v) = (Vec::new(), Vec::new());
        let mut best = ParamStore::new();
        for t in &header.tensors {
            let n = t.rows * t.cols;
            let (chunk, rest) = data.split_at(n * 8);
            data = rest;
            let vals = chunk.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            let a =
                Array2::from_shape_vec((t.rows, t.cols), vals).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
            match t.group {
                Group::Param => {
                    params.add(t.name.clone(), a);
                }
                Group::AdamM => m.push(a),
                Group::AdamV => v.push(a),
                Group::Best => {
                    best.add(t.name.clone(), a);
                }
            }
        }
        let adam = match header.adam_step {
            Some(step) => {
                if m.len() != params.len() || v.len() != params.len() {
                    return Err(bad("optimiser moments do not match the parameters"));
                }
                Some(AdamState { step, m, v })
            }
            None if m.is_empty() && v.is_empty() => None,
            None => return Err(bad("optimiser moments without a step count")),
        };
        let best = match header.best_epoch {
            Some(epoch) => Some(BestSnapshot { epoch, score: header.best_score, params: best }),
            None if best.is_empty() => None,
            None => return Err(bad("best-model tensors without an epoch")),
        };
        Ok(Self {
            fusion: header.fusion,
            input_dims: header.input_dims,
            train: header.train,
            seed: header.seed,
            epoch: header.epoch,
            params,
            adam,
            best,
            history: header.history,
            metadata: header.metadata,
        })
    }

    /// Atomic write via a temporary sibling file.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let io = |source| ModelError::Io { path: path.to_path_buf(), source };
        let tmp = path.with_extension("ckpt.tmp");
        let mut f = fs::File::create(&tmp).map_err(io)?;
        f.write_all(&self.encode()).and_then(|_| f.sync_all()).map_err(io)?;
        drop(f);
        fs::rename(&tmp, path).map_err(io)
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let bytes = fs::read(path).map_err(|source| ModelError::Io { path: path.to_path_buf(), source })?;
        Self::decode(&bytes)
    }
}
