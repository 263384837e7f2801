//! Fusion network, training objective and training loop.
//!
//! Feature tokens of each modality are projected to a common width, fused
//! pairwise by symmetric cross-modality attention, concatenated with the
//! pooled originals and regressed to per-dimension quality scores.

mod checkpoint;
mod config;
mod loss;
mod network;
mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use checkpoint::Checkpoint;
pub use config::{Ablation, FusionConfig, Modality, FUSION_PAIRS};
pub use loss::{quality_loss, rank_loss, LossBreakdown};
pub use network::{InputDims, Scma, UgvqModel};
pub use train::{predict_all, targets, BestSnapshot, EpochMetrics, Sample, TrainConfig, Trainer};

use crate::corpus::MosEntry;
use crate::dimension::Dimension;
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("invalid model configuration: {0}")]
    Config(String),
    #[error("all modalities are disabled")]
    NoFeatures,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite values in {0}")]
    NonFinite(&'static str),
    #[error("training diverged at epoch {epoch}, batch {batch} (videos {}): {cause}", video_ids.join(", "))]
    Divergence { epoch: usize, batch: usize, video_ids: Vec<String>, cause: String },
    #[error("{0} split is empty")]
    EmptySplit(&'static str),
    #[error("video {video_id} has no {dimension} target")]
    MissingTarget { video_id: String, dimension: Dimension },
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Scores on the MOS scale for the three quality dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityTriple {
    pub spatial: f64,
    pub temporal: f64,
    pub alignment: f64,
}

impl QualityTriple {
    pub fn new(spatial: f64, temporal: f64, alignment: f64) -> Self {
        Self { spatial, temporal, alignment }
    }

    pub fn get(&self, d: Dimension) -> f64 {
        match d {
            Dimension::Spatial => self.spatial,
            Dimension::Temporal => self.temporal,
            Dimension::Alignment => self.alignment,
        }
    }

    pub fn set(&mut self, d: Dimension, v: f64) {
        match d {
            Dimension::Spatial => self.spatial = v,
            Dimension::Temporal => self.temporal = v,
            Dimension::Alignment => self.alignment = v,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.spatial.is_finite() && self.temporal.is_finite() && self.alignment.is_finite()
    }

    /// Training target from a MOS entry. Dimensions outside `needed` may be
    /// absent and are filled with 0.
    pub fn target(entry: &MosEntry, needed: &[Dimension]) -> Result<Self, ModelError> {
        let mut t = Self::new(0.0, 0.0, 0.0);
        for &d in needed {
            let v = entry
                .get(d)
                .ok_or_else(|| ModelError::MissingTarget { video_id: entry.video_id.clone(), dimension: d })?;
            t.set(d, v);
        }
        Ok(t)
    }
}
