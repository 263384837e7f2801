use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::backbone::{BackboneRegistry, BackboneSpec, FrameEncoder, MotionEncoder, TextEncoder};
use super::toy::{HashedBagTextEncoder, MeanDiffMotionEncoder, ToyConvFrameEncoder};
use super::{plan_keyframes, AggregatorConfig, FeatureBundle, FeatureError, FrameAggregator};
use crate::corpus::{DatasetManifest, Frame, FrameDecoder, VideoClip};
use crate::hashing::WeightDigest;

/// Everything that determines the features of a clip.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureConfig {
    pub spatial_backbone: BackboneSpec,
    pub temporal_backbone: BackboneSpec,
    pub text_backbone: BackboneSpec,
    #[serde(default)]
    pub aggregator: AggregatorConfig,
    #[serde(default = "default_keyframes")]
    pub keyframes: usize,
}

fn default_keyframes() -> usize {
    8
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            spatial_backbone: BackboneSpec::new(ToyConvFrameEncoder::NAME, 64),
            temporal_backbone: BackboneSpec::new(MeanDiffMotionEncoder::NAME, 32),
            text_backbone: BackboneSpec::new(HashedBagTextEncoder::NAME, 64),
            aggregator: AggregatorConfig::default(),
            keyframes: default_keyframes(),
        }
    }
}

/// Bundles the three backbones and the aggregator. Safe to share across
/// threads; every method is a pure function of its inputs.
pub struct FeatureExtractor {
    frame: Arc<dyn FrameEncoder>,
    motion: Arc<dyn MotionEncoder>,
    text: Arc<dyn TextEncoder>,
    aggregator: FrameAggregator,
    keyframes: usize,
    invocations: AtomicUsize,
}

impl FeatureExtractor {
    pub fn new(config: &FeatureConfig, registry: &BackboneRegistry) -> Result<Self, FeatureError> {
        if config.keyframes == 0 {
            return Err(FeatureError::InvalidConfig("keyframes must be positive".into()));
        }
        let frame = registry.frame_encoder(&config.spatial_backbone)?;
        let motion = registry.motion_encoder(&config.temporal_backbone)?;
        let text = registry.text_encoder(&config.text_backbone)?;
        let aggregator = FrameAggregator::new(config.aggregator.clone(), frame.output_dim(), config.keyframes)?;
        for (spec, what) in [
            (&config.spatial_backbone, "spatial"),
            (&config.temporal_backbone, "temporal"),
            (&config.text_backbone, "text"),
        ] {
            if spec.trainable {
                log::warn!("{what} backbone {} requested trainable; backbones are kept frozen", spec.name);
            }
        }
        if config.aggregator.trainable {
            log::warn!("frame aggregator requested trainable; it is kept frozen");
        }
        Ok(Self { frame, motion, text, aggregator, keyframes: config.keyframes, invocations: AtomicUsize::new(0) })
    }

    pub fn keyframes(&self) -> usize {
        self.keyframes
    }

    /// `(D_s, D_t, D_x)`.
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.frame.output_dim(), self.motion.output_dim(), self.text.output_dim())
    }

    /// Expected bundle shapes.
    pub fn shapes(&self) -> [(usize, usize); 3] {
        let (s, t, x) = self.dims();
        [(self.keyframes, s), (2, t), (1, x)]
    }

    /// Number of backbone calls made so far (one per encode_* call).
    pub fn invocations(&self) -> usize {
        self.invocations.load(Ordering::Relaxed)
    }

    /// Changes whenever any backbone, the aggregator or the keyframe count does.
    pub fn fingerprint(&self) -> String {
        let mut d = WeightDigest::new();
        for fp in [self.frame.fingerprint(), self.motion.fingerprint(), self.text.fingerprint()] {
            d.bytes(fp.as_bytes()).bytes(&[0]);
        }
        d.bytes(self.aggregator.digest().as_bytes());
        d.bytes(&(self.keyframes as u64).to_le_bytes());
        d.hex()[..32].to_string()
    }

    pub fn encode_spatial(&self, frames: &[Frame]) -> Result<Array2<f64>, FeatureError> {
        let plan = plan_keyframes(frames.len(), self.keyframes)?;
        self.invocations.fetch_add(1, Ordering::Relaxed);
        let dim = self.frame.output_dim();
        let mut tokens = Array2::zeros((self.keyframes, dim));
        for (row, &idx) in plan.indices.iter().enumerate() {
            let v = self.frame.encode_frame(&frames[idx])?;
            if v.len() != dim {
                return Err(FeatureError::DimensionMismatch(format!(
                    "frame encoder {} returned {} values, declared {dim}",
                    self.frame.name(),
                    v.len()
                )));
            }
            tokens.row_mut(row).assign(&ndarray::Array1::from(v));
        }
        self.aggregator.forward(&tokens)
    }

    pub fn encode_temporal(&self, frames: &[Frame]) -> Result<Array2<f64>, FeatureError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        let t = self.motion.encode_clip(frames)?;
        if t.dim() != (2, self.motion.output_dim()) {
            return Err(FeatureError::DimensionMismatch(format!(
                "motion encoder {} returned {:?}, declared 2 x {}",
                self.motion.name(),
                t.dim(),
                self.motion.output_dim()
            )));
        }
        Ok(t)
    }

    pub fn encode_text(&self, text: &str) -> Result<Array2<f64>, FeatureError> {
        self.invocations.fetch_add(1, Ordering::Relaxed);
        let v = self.text.encode_text(text)?;
        if v.len() != self.text.output_dim() {
            return Err(FeatureError::DimensionMismatch(format!(
                "text encoder {} returned {} values, declared {}",
                self.text.name(),
                v.len(),
                self.text.output_dim()
            )));
        }
        Ok(ndarray::Array1::from(v).insert_axis(Axis(0)))
    }

    pub fn extract(&self, frames: &[Frame], prompt: &str) -> Result<FeatureBundle, FeatureError> {
        let bundle = FeatureBundle {
            spatial: self.encode_spatial(frames)?,
            temporal: self.encode_temporal(frames)?,
            text: self.encode_text(prompt)?,
        };
        for (m, stage) in [(&bundle.spatial, "spatial"), (&bundle.temporal, "temporal"), (&bundle.text, "text")] {
            if m.iter().any(|v| !v.is_finite()) {
                return Err(FeatureError::NonFinite(stage));
            }
        }
        Ok(bundle)
    }

    /// Decodes `clip` and extracts its bundle with the clip's prompt.
    pub fn extract_clip(
        &self,
        decoder: &FrameDecoder,
        manifest: &DatasetManifest,
        clip: &VideoClip,
    ) -> Result<FeatureBundle, FeatureError> {
        let prompt = manifest.prompt(&clip.prompt_id).ok_or_else(|| crate::corpus::CorpusError::UnknownPrompt {
            video_id: clip.video_id.clone(),
            prompt_id: clip.prompt_id.clone(),
        })?;
        let frames = decoder.frames(manifest, clip)?;
        self.extract(&frames, &prompt.text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> FeatureConfig {
        FeatureConfig {
            spatial_backbone: BackboneSpec::new(ToyConvFrameEncoder::NAME, 8),
            temporal_backbone: BackboneSpec::new(MeanDiffMotionEncoder::NAME, 6),
            text_backbone: BackboneSpec::new(HashedBagTextEncoder::NAME, 10),
            aggregator: AggregatorConfig { layers: 2, heads: 2, ffn_dim: 16, ..AggregatorConfig::default() },
            keyframes: 8,
        }
    }

    #[test]
    fn shapes_follow_configuration() {
        let ex = FeatureExtractor::new(&small_config(), &BackboneRegistry::default()).unwrap();
        for n in [2usize, 5, 8, 30] {
            let frames: Vec<Frame> = (0..n).map(|i| Frame::filled(12, 20, i as f32 / 30.0)).collect();
            let b = ex.extract(&frames, "a cat sleeping on a sofa").unwrap();
            assert_eq!(b.shapes(), ex.shapes());
            assert!(b.is_finite());
        }
    }

    #[test]
    fn identity_aggregator_returns_frame_embeddings() {
        let mut cfg = small_config();
        cfg.aggregator = AggregatorConfig::identity();
        let reg = BackboneRegistry::default();
        let ex = FeatureExtractor::new(&cfg, &reg).unwrap();
        let frames: Vec<Frame> = (0..16).map(|i| Frame::filled(8, 8, i as f32 / 16.0)).collect();
        let s = ex.encode_spatial(&frames).unwrap();
        let enc = reg.frame_encoder(&cfg.spatial_backbone).unwrap();
        for (row, idx) in [0usize, 2, 4, 6, 8, 10, 12, 14].into_iter().enumerate() {
            assert_eq!(s.row(row).to_vec(), enc.encode_frame(&frames[idx]).unwrap());
        }
    }

    #[test]
    fn fingerprint_depends_on_every_component() {
        let reg = BackboneRegistry::default();
        let base = FeatureExtractor::new(&small_config(), &reg).unwrap().fingerprint();
        let mut c = small_config();
        c.text_backbone.seed = 1;
        assert_ne!(FeatureExtractor::new(&c, &reg).unwrap().fingerprint(), base);
        let mut c = small_config();
        c.keyframes = 4;
        assert_ne!(FeatureExtractor::new(&c, &reg).unwrap().fingerprint(), base);
        let mut c = small_config();
        c.aggregator.seed = 9;
        assert_ne!(FeatureExtractor::new(&c, &reg).unwrap().fingerprint(), base);
        assert_eq!(FeatureExtractor::new(&small_config(), &reg).unwrap().fingerprint(), base);
    }
}
