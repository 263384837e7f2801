use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{
    Background, CorpusError, DatasetManifest, Foreground, Motion, PromptRecord, VideoClip, MAX_PROMPT_WORDS,
    MIN_PROMPT_WORDS,
};
use crate::Dimension;

/// Per-video MOS as carried in a manifest `mos` line. A dimension may be
/// absent when no rating survived screening for it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MosEntry {
    pub video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spatial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alignment: Option<f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub rater_count: BTreeMap<Dimension, usize>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub std: BTreeMap<Dimension, f64>,
}

impl MosEntry {
    pub fn get(&self, dim: Dimension) -> Option<f64> {
        match dim {
            Dimension::Spatial => self.spatial,
            Dimension::Temporal => self.temporal,
            Dimension::Alignment => self.alignment,
        }
    }

    pub fn set(&mut self, dim: Dimension, value: Option<f64>) {
        match dim {
            Dimension::Spatial => self.spatial = value,
            Dimension::Temporal => self.temporal = value,
            Dimension::Alignment => self.alignment = value,
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PromptLine {
    #[allow(dead_code)]
    kind: String,
    prompt_id: String,
    text: String,
    foreground: Value,
    background: Value,
    motion: Value,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VideoLine {
    #[allow(dead_code)]
    kind: String,
    video_id: String,
    prompt_id: String,
    model_name: String,
    path: String,
    fps: f64,
    width: usize,
    height: usize,
    num_frames: usize,
}

#[derive(Serialize)]
struct MosLine<'a> {
    kind: &'static str,
    #[serde(flatten)]
    entry: &'a MosEntry,
}

impl MosEntry {
    /// Serialises as a manifest-compatible `mos` line (no trailing newline).
    pub fn to_jsonl(&self) -> String {
        serde_json::to_string(&MosLine { kind: "mos", entry: self }).expect("mos entry serialises")
    }
}

#[derive(Serialize)]
struct Tagged<'a, T: Serialize> {
    kind: &'static str,
    #[serde(flatten)]
    item: &'a T,
}

impl DatasetManifest {
    /// The whole manifest as JSONL: prompts, then videos, then MOS lines.
    /// Paths are written as stored, so relative paths stay relative.
    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |line: String| {
            out.push_str(&line);
            out.push('\n');
        };
        for p in &self.prompts {
            push(serde_json::to_string(&Tagged { kind: "prompt", item: p }).expect("prompt serialises"));
        }
        for v in &self.videos {
            push(serde_json::to_string(&Tagged { kind: "video", item: v }).expect("video serialises"));
        }
        for m in &self.mos {
            push(m.to_jsonl());
        }
        out
    }
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, CorpusError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let mut manifest = parse_manifest(&text)?;
    manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
    Ok(manifest)
}

fn category<T: serde::de::DeserializeOwned>(value: Value, axis: &str, line: usize) -> Result<T, CorpusError> {
    let shown = value.to_string();
    serde_json::from_value(value)
        .map_err(|_| CorpusError::Taxonomy { line, message: format!("{axis} value {shown} is not a known category") })
}

fn parse_err(line: usize, message: impl Into<String>) -> CorpusError {
    CorpusError::Parse { line, message: message.into() }
}

fn mos_line(mut value: Value, line: usize) -> Result<MosEntry, CorpusError> {
    if let Some(map) = value.as_object_mut() {
        map.remove("kind");
    }
    let m: MosEntry = serde_json::from_value(value).map_err(|e| parse_err(line, e.to_string()))?;
    for dim in Dimension::ALL {
        if let Some(s) = m.get(dim) {
            if !(0.0..=100.0).contains(&s) {
                return Err(parse_err(line, format!("{dim} mos {s} outside [0, 100]")));
            }
        }
    }
    Ok(m)
}

/// Parses a file holding only `mos` lines, such as the output of rating
/// processing. Video ids are not resolved; duplicates are rejected.
pub fn parse_mos_lines(text: &str) -> Result<Vec<MosEntry>, CorpusError> {
    let mut out: Vec<MosEntry> = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| parse_err(line, e.to_string()))?;
        if value.get("kind").and_then(Value::as_str) != Some("mos") {
            return Err(parse_err(line, "expected a line with \"kind\": \"mos\""));
        }
        let m = mos_line(value, line)?;
        if !seen.insert(m.video_id.clone()) {
            return Err(CorpusError::Duplicate { kind: "mos", id: m.video_id });
        }
        out.push(m);
    }
    Ok(out)
}

/// Parses and validates JSON-lines manifest text. Blank lines are ignored;
/// line numbers in errors are 1-based.
pub fn parse_manifest(text: &str) -> Result<DatasetManifest, CorpusError> {
    let mut manifest = DatasetManifest::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value = serde_json::from_str(raw).map_err(|e| parse_err(line, e.to_string()))?;
        let kind = value
            .get("kind")
            .and_then(Value::as_str)
            .ok_or_else(|| parse_err(line, "missing string field \"kind\""))?
            .to_string();
        match kind.as_str() {
            "prompt" => {
                let p: PromptLine = serde_json::from_value(value).map_err(|e| parse_err(line, e.to_string()))?;
                let record = PromptRecord {
                    foreground: category::<Foreground>(p.foreground, "foreground", line)?,
                    background: category::<Background>(p.background, "background", line)?,
                    motion: category::<Motion>(p.motion, "motion", line)?,
                    prompt_id: p.prompt_id,
                    text: p.text,
                };
                manifest.prompts.push(record);
            }
            "video" => {
                let v: VideoLine = serde_json::from_value(value).map_err(|e| parse_err(line, e.to_string()))?;
                manifest.videos.push(VideoClip {
                    video_id: v.video_id,
                    prompt_id: v.prompt_id,
                    model_name: v.model_name,
                    path: v.path.into(),
                    fps: v.fps,
                    width: v.width,
                    height: v.height,
                    num_frames: v.num_frames,
                });
            }
            "mos" => manifest.mos.push(mos_line(value, line)?),
            other => return Err(parse_err(line, format!("unknown kind {other:?}"))),
        }
    }
    validate(&manifest)?;
    Ok(manifest)
}

pub(super) fn validate(m: &DatasetManifest) -> Result<(), CorpusError> {
    let mut prompt_ids = HashSet::new();
    for p in &m.prompts {
        if !prompt_ids.insert(p.prompt_id.as_str()) {
            return Err(CorpusError::Duplicate { kind: "prompt", id: p.prompt_id.clone() });
        }
        let words = p.word_count();
        if !(MIN_PROMPT_WORDS..=MAX_PROMPT_WORDS).contains(&words) {
            return Err(CorpusError::PromptLength { prompt_id: p.prompt_id.clone(), words });
        }
    }
    let mut video_ids = HashSet::new();
    for v in &m.videos {
        if !video_ids.insert(v.video_id.as_str()) {
            return Err(CorpusError::Duplicate { kind: "video", id: v.video_id.clone() });
        }
        if !prompt_ids.contains(v.prompt_id.as_str()) {
            return Err(CorpusError::UnknownPrompt { video_id: v.video_id.clone(), prompt_id: v.prompt_id.clone() });
        }
        let invalid =
            |message: &str| CorpusError::InvalidVideo { video_id: v.video_id.clone(), message: message.to_string() };
        if !(v.fps.is_finite() && v.fps > 0.0) {
            return Err(invalid("fps must be positive"));
        }
        if v.width == 0 || v.height == 0 {
            return Err(invalid("width and height must be at least 1"));
        }
        if v.num_frames == 0 {
            return Err(invalid("num_frames must be at least 1"));
        }
    }
    let mut mos_ids = HashSet::new();
    for entry in &m.mos {
        if !video_ids.contains(entry.video_id.as_str()) {
            return Err(CorpusError::UnknownVideo { video_id: entry.video_id.clone() });
        }
        if !mos_ids.insert(entry.video_id.as_str()) {
            return Err(CorpusError::Duplicate { kind: "mos", id: entry.video_id.clone() });
        }
    }
    Ok(())
}
