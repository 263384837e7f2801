//! Feature extraction: keyframe sampling, pluggable backbones, the frozen
//! spatial aggregator and the on-disk feature cache.

mod aggregator;
mod backbone;
mod cache;
mod extractor;
mod keyframes;
mod toy;

use std::borrow::Cow;
use std::path::PathBuf;

use image::imageops::{self, FilterType};
use image::{ImageBuffer, Rgb};
use ndarray::Array2;

pub use aggregator::{AggregatorConfig, FrameAggregator};
pub use backbone::{Backbone, BackboneKind, BackboneRegistry, BackboneSpec, FrameEncoder, MotionEncoder, TextEncoder};
pub use cache::{decode_record, encode_record, extract_all, CacheLookup, CacheStats, FeatureCache, FeatureRecord};
pub use extractor::{FeatureConfig, FeatureExtractor};
pub use keyframes::{plan_keyframes, KeyframePlan};
pub use toy::{HashedBagTextEncoder, MeanDiffMotionEncoder, ToyConvFrameEncoder};

use crate::corpus::{CorpusError, Frame};
use crate::nn::NnError;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("invalid feature configuration: {0}")]
    InvalidConfig(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("unknown backbone {name:?}; available: {}", available.join(", "))]
    UnknownBackbone { name: String, available: Vec<String> },
    #[error("backbone {name:?} is a {actual}, expected a {expected}")]
    WrongKind { name: String, expected: BackboneKind, actual: BackboneKind },
    #[error("clip has {frames} frame(s); the motion backbone needs at least {min_frames}")]
    ClipTooShort { frames: usize, min_frames: usize },
    #[error("prompt is empty")]
    EmptyPrompt,
    #[error("prompt has {tokens} tokens; the text backbone accepts at most {limit}")]
    TokenOverflow { tokens: usize, limit: usize },
    #[error("non-finite values in {0} features")]
    NonFinite(&'static str),
    #[error("cache entry for {video_id:?} matches the fingerprint but has shape {found}, expected {expected}")]
    FingerprintCollision { video_id: String, expected: String, found: String },
    #[error("malformed feature record: {0}")]
    Record(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Nn(#[from] NnError),
}

/// Spatial (`N_s x D_s`), temporal (`2 x D_t`) and text (`1 x D_x`) tokens
/// for one video and its prompt.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureBundle {
    pub spatial: Array2<f64>,
    pub temporal: Array2<f64>,
    pub text: Array2<f64>,
}

impl FeatureBundle {
    pub fn shapes(&self) -> [(usize, usize); 3] {
        [self.spatial.dim(), self.temporal.dim(), self.text.dim()]
    }

    pub fn is_finite(&self) -> bool {
        [&self.spatial, &self.temporal, &self.text].iter().all(|m| m.iter().all(|v| v.is_finite()))
    }
}

/// Bilinear (triangle filter) resize; borrows when no resize is needed.
pub fn resize_frame(frame: &Frame, height: usize, width: usize) -> Cow<'_, Frame> {
    if frame.height == height && frame.width == width {
        return Cow::Borrowed(frame);
    }
    let buf: ImageBuffer<Rgb<f32>, Vec<f32>> =
        ImageBuffer::from_raw(frame.width as u32, frame.height as u32, frame.data.clone())
            .expect("frame buffer matches its dimensions");
    let out = imageops::resize(&buf, width as u32, height as u32, FilterType::Triangle);
    let data = out.into_raw().into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    Cow::Owned(Frame::new(height, width, data))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resize_preserves_constant_frames() {
        let f = Frame::filled(37, 53, 0.4);
        let r = resize_frame(&f, 16, 16);
        assert_eq!((r.height, r.width), (16, 16));
        assert!(r.data.iter().all(|&v| (v - 0.4).abs() < 1e-6));
        assert!(matches!(resize_frame(&f, 37, 53), Cow::Borrowed(_)));
    }
}
