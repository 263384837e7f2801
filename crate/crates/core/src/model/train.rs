use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::quality_loss;
use super::network::UgvqModel;
use super::{ModelError, QualityTriple};
use crate::eval::srcc;
use crate::features::FeatureBundle;
use crate::nn::{Adam, AdamConfig, Graph, ParamStore};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    /// Epochs between learning-rate decays; 0 disables decay.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lambda_rank: f64,
    pub adam: AdamConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            lr_decay_every: 5,
            lr_decay_factor: 0.1,
            epochs: 50,
            batch_size: 32,
            lambda_rank: 1.0,
            adam: AdamConfig::default(),
        }
    }
}

impl TrainConfig {
    /// Step schedule: `lr * factor^(epoch / every)`.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        match epoch.checked_div(self.lr_decay_every) {
            Some(steps) => self.lr * self.lr_decay_factor.powi(steps as i32),
            None => self.lr,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(ModelError::Config(format!("lr must be positive, got {}", self.lr)));
        }
        if !(self.lr_decay_factor.is_finite() && self.lr_decay_factor > 0.0) {
            return Err(ModelError::Config("lr_decay_factor must be positive".into()));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(ModelError::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lambda_rank.is_finite() && self.lambda_rank >= 0.0) {
            return Err(ModelError::Config("lambda_rank must be non-negative".into()));
        }
        Ok(())
    }
}

/// One labelled example.
#[derive(Debug, Clone)]
pub struct Sample {
    pub video_id: String,
    pub bundle: FeatureBundle,
    pub target: QualityTriple,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    /// Per target dimension, in model output order; `None` when undefined.
    pub val_srcc: Vec<Option<f64>>,
    pub val_srcc_mean: Option<f64>,
    /// Whether this epoch became the selected model.
    pub selected: bool,
}

/// Parameters of the best validation epoch so far.
#[derive(Debug, Clone, PartialEq)]
pub struct BestSnapshot {
    pub epoch: usize,
    pub score: Option<f64>,
    pub params: ParamStore,
}

/// Mini-batch Adam on the MAE + rank objective with best-validation model
/// selection. Epoch `e` shuffles with a stream derived from `(seed, e)`, so
/// a run resumed from a checkpoint matches the uninterrupted run exactly.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub(crate) model: UgvqModel,
    pub(crate) adam: Adam,
    pub(crate) config: TrainConfig,
    pub(crate) seed: u64,
    pub(crate) epoch: usize,
    pub(crate) best: Option<BestSnapshot>,
    pub(crate) history: Vec<EpochMetrics>,
}

pub fn targets(model: &UgvqModel, samples: &[&Sample]) -> Array2<f64> {
    let dims = &model.config().target_dimensions;
    Array2::from_shape_fn((samples.len(), dims.len()), |(i, d)| samples[i].target.get(dims[d]))
}

/// Predictions in chunks of `chunk` samples.
pub fn predict_all(model: &UgvqModel, samples: &[&Sample], chunk: usize) -> Result<Array2<f64>, ModelError> {
    let mut out = Array2::zeros((samples.len(), model.config().outputs()));
    for (c, part) in samples.chunks(chunk.max(1)).enumerate() {
        let bundles: Vec<&FeatureBundle> = part.iter().map(|s| &s.bundle).collect();
        let p = model.predict(&bundles)?;
        let start = c * chunk.max(1);
        out.slice_mut(ndarray::s![start..start + part.len(), ..]).assign(&p);
    }
    Ok(out)
}

impl Trainer {
    pub fn new(model: UgvqModel, config: TrainConfig, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        let adam = Adam::new(model.params(), config.adam);
        Ok(Self { model, adam, config, seed, epoch: 0, best: None, history: Vec::new() })
    }

    pub fn model(&self) -> &UgvqModel {
        &self.model
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    /// Next epoch to run.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn history(&self) -> &[EpochMetrics] {
        &self.history
    }

    pub fn best(&self) -> Option<&BestSnapshot> {
        self.best.as_ref()
    }

    pub fn is_finished(&self) -> bool {
        self.epoch >= self.config.epochs
    }

    fn epoch_order(&self, n: usize) -> Vec<usize> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.epoch as u64 + 1);
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut rng);
        order
    }

    /// One optimiser step on `batch`; returns the batch loss.
    fn step(&mut self, batch: &[&Sample], lr: f64, batch_index: usize) -> Result<f64, ModelError> {
        let diverged = |cause: String| ModelError::Divergence {
            epoch: self.epoch,
            batch: batch_index,
            video_ids: batch.iter().map(|s| s.video_id.clone()).collect(),
            cause,
        };
        let target = targets(&self.model, batch);
        let grads = {
            let mut g = Graph::new(self.model.params());
            let bundles: Vec<&FeatureBundle> = batch.iter().map(|s| &s.bundle).collect();
            let pred = match self.model.forward(&mut g, &bundles) {
                Ok(p) => p,
                Err(ModelError::Nn(e)) => return Err(diverged(e.to_string())),
                Err(e) => return Err(e),
            };
            let (loss, dpred) = match quality_loss(g.value(pred), &target, self.config.lambda_rank) {
                Ok(l) => l,
                Err(ModelError::NonFinite(what)) => return Err(diverged(format!("non-finite {what}"))),
                Err(e) => return Err(e),
            };
            if !loss.total.is_finite() {
                return Err(diverged("non-finite loss".into()));
            }
            let grads = g.backward(&[(pred, dpred)]);
            (grads, loss.total)
        };
        self.adam.step(self.model.params_mut(), &grads.0, lr);
        Ok(grads.1)
    }

    /// Runs the next epoch and updates the model selection.
    pub fn run_epoch(&mut self, train: &[&Sample], val: &[&Sample]) -> Result<&EpochMetrics, ModelError> {
        if train.is_empty() {
            return Err(ModelError::EmptySplit("train"));
        }
        if val.is_empty() {
            return Err(ModelError::EmptySplit("validation"));
        }
        let lr = self.config.lr_at(self.epoch);
        let order = self.epoch_order(train.len());
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for (b, idx) in order.chunks(self.config.batch_size).enumerate() {
            let batch: Vec<&Sample> = idx.iter().map(|&i| train[i]).collect();
            loss_sum += self.step(&batch, lr, b)?;
            batches += 1;
        }
        let pred = predict_all(&self.model, val, self.config.batch_size)?;
        let target = targets(&self.model, val);
        let val_loss = quality_loss(&pred, &target, self.config.lambda_rank).ok().map(|(l, _)| l.total);
        let val_srcc: Vec<Option<f64>> =
            (0..pred.ncols()).map(|d| srcc(&pred.column(d).to_vec(), &target.column(d).to_vec()).ok()).collect();
        let defined: Vec<f64> = val_srcc.iter().flatten().copied().collect();
        let val_srcc_mean = (!defined.is_empty()).then(|| defined.iter().sum::<f64>() / defined.len() as f64);
        let improves = match (&self.best, val_srcc_mean) {
            (None, _) => true,
            (Some(b), Some(s)) => b.score.is_none_or(|best| s > best),
            (Some(_), None) => false,
        };
        if improves {
            self.best =
                Some(BestSnapshot { epoch: self.epoch, score: val_srcc_mean, params: self.model.params().clone() });
        }
        self.history.push(EpochMetrics {
            epoch: self.epoch,
            lr,
            train_loss: loss_sum / batches as f64,
            val_loss,
            val_srcc,
            val_srcc_mean,
            selected: improves,
        });
        self.epoch += 1;
        Ok(self.history.last().expect("just pushed"))
    }

    /// Runs the remaining epochs, calling `on_epoch` after each.
    pub fn fit(
        &mut self,
        train: &[&Sample],
        val: &[&Sample],
        mut on_epoch: impl FnMut(&Trainer, &EpochMetrics),
    ) -> Result<(), ModelError> {
        while !self.is_finished() {
            let m = self.run_epoch(train, val)?.clone();
            on_epoch(self, &m);
        }
        Ok(())
    }

    /// The selected model (best validation epoch), or the current one when
    /// no epoch has run.
    pub fn best_model(&self) -> UgvqModel {
        let mut m = self.model.clone();
        if let Some(b) = &self.best {
            m.load_params(b.params.clone()).expect("snapshot of the same model");
        }
        m
    }
}
