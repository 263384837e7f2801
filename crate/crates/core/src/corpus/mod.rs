//! Dataset manifests, prompt taxonomy and frame access.

mod frames;
mod manifest;
mod taxonomy;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

pub use frames::{
    decode_raw_clip, encode_raw_clip, encode_raw_clip_f32, Frame, FrameDecoder, FrameProvider, ImageSequenceProvider,
    RawClipProvider, RAW_CLIP_EXTENSION,
};
pub use manifest::{load_manifest, parse_manifest, parse_mos_lines, MosEntry};
pub use taxonomy::{taxonomy_histogram, TaxonomyHistogram};

pub const MIN_PROMPT_WORDS: usize = 4;
pub const MAX_PROMPT_WORDS: usize = 15;

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: taxonomy error: {message}")]
    Taxonomy { line: usize, message: String },
    #[error("video {video_id:?} references unknown prompt {prompt_id:?}")]
    UnknownPrompt { video_id: String, prompt_id: String },
    #[error("mos record references unknown video {video_id:?}")]
    UnknownVideo { video_id: String },
    #[error("duplicate {kind} id {id:?}")]
    Duplicate { kind: &'static str, id: String },
    #[error("prompt {prompt_id:?} has {words} words, expected {MIN_PROMPT_WORDS}..={MAX_PROMPT_WORDS}")]
    PromptLength { prompt_id: String, words: usize },
    #[error("video {video_id:?}: {message}")]
    InvalidVideo { video_id: String, message: String },
    #[error("decode failed for {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: decoded {actual} frames of {actual_w}x{actual_h}, manifest declares {expected} of {expected_w}x{expected_h}")]
    FrameMismatch {
        path: PathBuf,
        expected: usize,
        actual: usize,
        expected_w: usize,
        expected_h: usize,
        actual_w: usize,
        actual_h: usize,
    },
    #[error("no frame provider can decode {0}")]
    NoProvider(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Foreground {
    People,
    Animals,
    Plants,
    ManMadeObjects,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    Indoor,
    OutdoorNatural,
    OutdoorManMade,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Motion {
    Static,
    Dynamic,
    LocalMovement,
}

impl Foreground {
    pub const ALL: [Foreground; 4] =
        [Foreground::People, Foreground::Animals, Foreground::Plants, Foreground::ManMadeObjects];
}

impl Background {
    pub const ALL: [Background; 3] = [Background::Indoor, Background::OutdoorNatural, Background::OutdoorManMade];
}

impl Motion {
    pub const ALL: [Motion; 3] = [Motion::Static, Motion::Dynamic, Motion::LocalMovement];
}

/// A text prompt with exactly one label on each taxonomy axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptRecord {
    pub prompt_id: String,
    pub text: String,
    pub foreground: Foreground,
    pub background: Background,
    pub motion: Motion,
}

impl PromptRecord {
    pub fn word_count(&self) -> usize {
        self.text.split_whitespace().count()
    }
}

/// Path-based descriptor of one generated video. Frames are decoded on demand
/// through a [`FrameDecoder`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoClip {
    pub video_id: String,
    pub prompt_id: String,
    pub model_name: String,
    pub path: PathBuf,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    pub num_frames: usize,
}

impl VideoClip {
    pub fn duration(&self) -> f64 {
        self.num_frames as f64 / self.fps
    }
}

/// A validated corpus: every video resolves to a prompt, every MOS entry to
/// a video. Immutable once loaded.
#[derive(Debug, Clone, Default)]
pub struct DatasetManifest {
    pub prompts: Vec<PromptRecord>,
    pub videos: Vec<VideoClip>,
    pub mos: Vec<MosEntry>,
    /// Directory relative video paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn prompt(&self, prompt_id: &str) -> Option<&PromptRecord> {
        self.prompts.iter().find(|p| p.prompt_id == prompt_id)
    }

    pub fn video(&self, video_id: &str) -> Option<&VideoClip> {
        self.videos.iter().find(|v| v.video_id == video_id)
    }

    pub fn mos_for(&self, video_id: &str) -> Option<&MosEntry> {
        self.mos.iter().find(|m| m.video_id == video_id)
    }

    pub fn resolve_path(&self, clip: &VideoClip) -> PathBuf {
        if clip.path.is_absolute() {
            clip.path.clone()
        } else {
            self.base_dir.join(&clip.path)
        }
    }

    /// Distinct generator names, sorted.
    pub fn model_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self.videos.iter().map(|v| v.model_name.clone()).collect();
        names.sort();
        names.dedup();
        names
    }

    /// Re-runs the referential checks performed at load time. Useful for
    /// manifests assembled in code.
    pub fn validate(&self) -> Result<(), CorpusError> {
        manifest::validate(self)
    }
}
