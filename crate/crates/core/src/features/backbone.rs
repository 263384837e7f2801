use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::toy::{HashedBagTextEncoder, MeanDiffMotionEncoder, ToyConvFrameEncoder};
use super::FeatureError;
use crate::corpus::Frame;
use crate::hashing::WeightDigest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackboneKind {
    FrameEncoder,
    MotionEncoder,
    TextEncoder,
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackboneKind::FrameEncoder => "frame_encoder",
            BackboneKind::MotionEncoder => "motion_encoder",
            BackboneKind::TextEncoder => "text_encoder",
        })
    }
}

/// Common surface of every feature backbone. Implementations must be
/// deterministic: the same input always yields the same output.
pub trait Backbone: Send + Sync {
    fn name(&self) -> &str;
    fn output_dim(&self) -> usize;
    fn kind(&self) -> BackboneKind;
    /// Digest of everything that determines the backbone's outputs.
    fn weights_digest(&self) -> String;

    /// Hash of `(name, output_dim, weights digest)`.
    fn fingerprint(&self) -> String {
        let mut d = WeightDigest::new();
        d.bytes(self.name().as_bytes())
            .bytes(&[0])
            .bytes(&(self.output_dim() as u64).to_le_bytes())
            .bytes(self.weights_digest().as_bytes());
        d.hex()
    }
}

/// Embeds one frame. Frames arrive already resized to `input_size`.
pub trait FrameEncoder: Backbone {
    /// `(height, width)` expected by `encode_frame`.
    fn input_size(&self) -> (usize, usize);
    fn encode_frame(&self, frame: &Frame) -> Result<Vec<f64>, FeatureError>;
}

/// Embeds a whole clip as two pathway tokens (slow, fast), `2 x output_dim`.
pub trait MotionEncoder: Backbone {
    fn input_size(&self) -> (usize, usize);
    fn min_frames(&self) -> usize;
    fn encode_clip(&self, frames: &[Frame]) -> Result<Array2<f64>, FeatureError>;
}

pub trait TextEncoder: Backbone {
    fn max_tokens(&self) -> usize;
    fn encode_text(&self, text: &str) -> Result<Vec<f64>, FeatureError>;
}

/// Selection of one backbone implementation, as written in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BackboneSpec {
    pub name: String,
    pub output_dim: usize,
    #[serde(default)]
    pub seed: u64,
    /// Recorded for provenance; backbones are always frozen during fusion
    /// model training in this implementation.
    #[serde(default)]
    pub trainable: bool,
    /// Square input side the frames are resized to, when the backbone
    /// supports more than one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub input_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_frames: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_tokens: Option<usize>,
}

impl BackboneSpec {
    pub fn new(name: impl Into<String>, output_dim: usize) -> Self {
        Self {
            name: name.into(),
            output_dim,
            seed: 0,
            trainable: false,
            input_size: None,
            min_frames: None,
            max_tokens: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

type Ctor<T> = Box<dyn Fn(&BackboneSpec) -> Result<Arc<T>, FeatureError> + Send + Sync>;

/// Name-to-constructor tables for the three backbone roles.
pub struct BackboneRegistry {
    frame: BTreeMap<String, Ctor<dyn FrameEncoder>>,
    motion: BTreeMap<String, Ctor<dyn MotionEncoder>>,
    text: BTreeMap<String, Ctor<dyn TextEncoder>>,
}

impl Default for BackboneRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register_frame_encoder(ToyConvFrameEncoder::NAME, |s| Ok(Arc::new(ToyConvFrameEncoder::from_spec(s)?)));
        r.register_motion_encoder(MeanDiffMotionEncoder::NAME, |s| Ok(Arc::new(MeanDiffMotionEncoder::from_spec(s)?)));
        r.register_text_encoder(HashedBagTextEncoder::NAME, |s| Ok(Arc::new(HashedBagTextEncoder::from_spec(s)?)));
        r
    }
}

impl BackboneRegistry {
    pub fn empty() -> Self {
        Self { frame: BTreeMap::new(), motion: BTreeMap::new(), text: BTreeMap::new() }
    }

    pub fn register_frame_encoder(
        &mut self,
        name: &str,
        ctor: impl Fn(&BackboneSpec) -> Result<Arc<dyn FrameEncoder>, FeatureError> + Send + Sync + 'static,
    ) {
        self.frame.insert(name.to_string(), Box::new(ctor));
    }

    pub fn register_motion_encoder(
        &mut self,
        name: &str,
        ctor: impl Fn(&BackboneSpec) -> Result<Arc<dyn MotionEncoder>, FeatureError> + Send + Sync + 'static,
    ) {
        self.motion.insert(name.to_string(), Box::new(ctor));
    }

    pub fn register_text_encoder(
        &mut self,
        name: &str,
        ctor: impl Fn(&BackboneSpec) -> Result<Arc<dyn TextEncoder>, FeatureError> + Send + Sync + 'static,
    ) {
        self.text.insert(name.to_string(), Box::new(ctor));
    }

    fn kind_of(&self, name: &str) -> Option<BackboneKind> {
        if self.frame.contains_key(name) {
            Some(BackboneKind::FrameEncoder)
        } else if self.motion.contains_key(name) {
            Some(BackboneKind::MotionEncoder)
        } else if self.text.contains_key(name) {
            Some(BackboneKind::TextEncoder)
        } else {
            None
        }
    }

    fn lookup_error(&self, name: &str, expected: BackboneKind) -> FeatureError {
        match self.kind_of(name) {
            Some(actual) => FeatureError::WrongKind { name: name.to_string(), expected, actual },
            None => FeatureError::UnknownBackbone {
                name: name.to_string(),
                available: self.frame.keys().chain(self.motion.keys()).chain(self.text.keys()).cloned().collect(),
            },
        }
    }

    fn check<T: Backbone + ?Sized>(spec: &BackboneSpec, b: Arc<T>) -> Result<Arc<T>, FeatureError> {
        if b.output_dim() != spec.output_dim || spec.output_dim == 0 {
            return Err(FeatureError::InvalidConfig(format!(
                "backbone {} built with output_dim {} but spec asks for {}",
                spec.name,
                b.output_dim(),
                spec.output_dim
            )));
        }
        Ok(b)
    }

    pub fn frame_encoder(&self, spec: &BackboneSpec) -> Result<Arc<dyn FrameEncoder>, FeatureError> {
        let ctor =
            self.frame.get(&spec.name).ok_or_else(|| self.lookup_error(&spec.name, BackboneKind::FrameEncoder))?;
        Self::check(spec, ctor(spec)?)
    }

    pub fn motion_encoder(&self, spec: &BackboneSpec) -> Result<Arc<dyn MotionEncoder>, FeatureError> {
        let ctor =
            self.motion.get(&spec.name).ok_or_else(|| self.lookup_error(&spec.name, BackboneKind::MotionEncoder))?;
        Self::check(spec, ctor(spec)?)
    }

    pub fn text_encoder(&self, spec: &BackboneSpec) -> Result<Arc<dyn TextEncoder>, FeatureError> {
        let ctor = self.text.get(&spec.name).ok_or_else(|| self.lookup_error(&spec.name, BackboneKind::TextEncoder))?;
        Self::check(spec, ctor(spec)?)
    }
}
