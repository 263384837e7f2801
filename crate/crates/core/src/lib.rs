//! Multi-dimensional quality assessment for AI-generated video.
//!
//! The crate is organised around the stages of the pipeline:
//!
//! - [`corpus`]: dataset manifests, prompt taxonomy and frame decoding.
//! - [`subjective`]: raw observer ratings to screened, normalised MOS.
//! - [`features`]: keyframe sampling, pluggable backbones, the spatial
//!   sequence aggregator and the on-disk feature cache.
//! - [`model`]: symmetric cross-modality attention fusion, the quality
//!   regressor, the MAE + rank objective and the training loop.
//! - [`eval`]: prompt-disjoint splits, SRCC/KRCC/PLCC, video- and
//!   model-level evaluation, multi-trial runs and metric adapters.
//!
//! [`nn`] holds the small reverse-mode autodiff engine the model and the
//! aggregator are built on.

pub mod corpus;
pub mod dimension;
pub mod eval;
pub mod features;
pub mod model;
pub mod nn;
pub mod subjective;
pub mod synthetic;

mod hashing;

pub use corpus::{DatasetManifest, PromptRecord, VideoClip};
pub use dimension::Dimension;
pub use features::FeatureBundle;
pub use model::QualityTriple;
