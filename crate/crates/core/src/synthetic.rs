//! Seeded synthetic corpora and rating fixtures.
//!
//! Every clip is `brightness + contrast * pattern(x, y) + jitter * (-1)^t`
//! with a fixed spatial pattern in `[-1, 1]`, so per-frame luma variance
//! grows with contrast and frame-to-frame change with jitter. Labels are
//! deterministic functions of the clip parameters:
//! - spatial MOS increases with contrast;
//! - temporal MOS decreases with jitter;
//! - alignment MOS increases with brightness for prompts asking for a
//!   "bright" scene and decreases with it for "dark" ones.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{
    encode_raw_clip_f32, Background, DatasetManifest, Foreground, Frame, MosEntry, Motion, PromptRecord, VideoClip,
};
use crate::dimension::Dimension;
use crate::subjective::{Rating, RatingMatrix};

pub const BRIGHTNESS: (f64, f64) = (0.3, 0.7);
pub const CONTRAST: (f64, f64) = (0.02, 0.24);
pub const JITTER: (f64, f64) = (0.0, 0.05);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClipParams {
    pub brightness: f64,
    pub contrast: f64,
    pub jitter: f64,
    pub bright_prompt: bool,
}

impl ClipParams {
    /// `(spatial, temporal, alignment)` MOS in `[10, 90]`.
    pub fn labels(&self) -> [f64; 3] {
        let unit = |v: f64, (lo, hi): (f64, f64)| (v - lo) / (hi - lo);
        let spatial = 10.0 + 80.0 * unit(self.contrast, CONTRAST);
        let temporal = 10.0 + 80.0 * (1.0 - unit(self.jitter, JITTER));
        let b = unit(self.brightness, BRIGHTNESS);
        let alignment = 10.0 + 80.0 * if self.bright_prompt { b } else { 1.0 - b };
        [spatial, temporal, alignment]
    }

    /// Pixel value stays inside `[0, 1]` for every parameter in range, so
    /// no clipping distorts the statistics.
    pub fn frames(&self, count: usize, height: usize, width: usize) -> Vec<Frame> {
        (0..count)
            .map(|t| {
                let flicker = if t % 2 == 0 { self.jitter } else { -self.jitter };
                let mut data = Vec::with_capacity(height * width * 3);
                for y in 0..height {
                    for x in 0..width {
                        let v = (self.brightness + self.contrast * pattern(y, x, height, width) + flicker) as f32;
                        data.extend_from_slice(&[v, v, v]);
                    }
                }
                Frame::new(height, width, data)
            })
            .collect()
    }
}

/// Smooth two-frequency pattern in `[-1, 1]`.
pub fn pattern(y: usize, x: usize, height: usize, width: usize) -> f64 {
    let u = std::f64::consts::TAU * x as f64 / width as f64;
    let v = std::f64::consts::TAU * y as f64 / height as f64;
    0.5 * (u.sin() + (2.0 * v).cos())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusSpec {
    pub prompts: usize,
    pub videos_per_prompt: usize,
    /// Generator models; videos of a prompt cycle through them.
    pub models: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub fps: f64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self { prompts: 12, videos_per_prompt: 4, models: 4, frames: 8, height: 32, width: 32, fps: 8.0, seed: 0 }
    }
}

const SUBJECTS: [(&str, Foreground); 8] = [
    ("dog", Foreground::Animals),
    ("woman", Foreground::People),
    ("tree", Foreground::Plants),
    ("car", Foreground::ManMadeObjects),
    ("cat", Foreground::Animals),
    ("child", Foreground::People),
    ("flower", Foreground::Plants),
    ("robot", Foreground::ManMadeObjects),
];
const PLACES: [(&str, Background); 6] = [
    ("kitchen", Background::Indoor),
    ("forest", Background::OutdoorNatural),
    ("street", Background::OutdoorManMade),
    ("library", Background::Indoor),
    ("meadow", Background::OutdoorNatural),
    ("harbor", Background::OutdoorManMade),
];
const ACTIONS: [(&str, Motion); 6] = [
    ("standing", Motion::Static),
    ("running", Motion::Dynamic),
    ("waving", Motion::LocalMovement),
    ("resting", Motion::Static),
    ("jumping", Motion::Dynamic),
    ("turning", Motion::LocalMovement),
];

#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub spec: CorpusSpec,
    pub manifest: DatasetManifest,
    pub params: BTreeMap<String, ClipParams>,
}

impl SyntheticCorpus {
    /// Manifest, clip parameters and MOS lines; no files are written.
    pub fn generate(spec: CorpusSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut manifest = DatasetManifest::default();
        let mut params = BTreeMap::new();
        for p in 0..spec.prompts {
            let bright = p % 2 == 0;
            let (subject, fg) = SUBJECTS[p % SUBJECTS.len()];
            let (place, bg) = PLACES[(p / 2) % PLACES.len()];
            let (action, motion) = ACTIONS[(p / 3) % ACTIONS.len()];
            let prompt_id = format!("p{p:04}");
            let tone = if bright { "bright" } else { "dark" };
            manifest.prompts.push(PromptRecord {
                prompt_id: prompt_id.clone(),
                text: format!("a {subject} {action} in a {tone} {place} scene"),
                foreground: fg,
                background: bg,
                motion,
            });
            for k in 0..spec.videos_per_prompt {
                let video_id = format!("{prompt_id}-v{k}");
                let cp = ClipParams {
                    brightness: rng.random_range(BRIGHTNESS.0..=BRIGHTNESS.1),
                    contrast: rng.random_range(CONTRAST.0..=CONTRAST.1),
                    jitter: rng.random_range(JITTER.0..=JITTER.1),
                    bright_prompt: bright,
                };
                let [s, t, a] = cp.labels();
                manifest.videos.push(VideoClip {
                    video_id: video_id.clone(),
                    prompt_id: prompt_id.clone(),
                    model_name: format!("gen-{}", (p + k) % spec.models.max(1)),
                    path: PathBuf::from(format!("clips/{video_id}.vclip")),
                    fps: spec.fps,
                    width: spec.width,
                    height: spec.height,
                    num_frames: spec.frames,
                });
                manifest.mos.push(MosEntry {
                    video_id: video_id.clone(),
                    spatial: Some(s),
                    temporal: Some(t),
                    alignment: Some(a),
                    rater_count: BTreeMap::new(),
                    std: BTreeMap::new(),
                });
                params.insert(video_id, cp);
            }
        }
        Self { spec, manifest, params }
    }

    pub fn frames(&self, video_id: &str) -> Option<Vec<Frame>> {
        self.params.get(video_id).map(|p| p.frames(self.spec.frames, self.spec.height, self.spec.width))
    }

    /// Writes `manifest.jsonl` and one lossless raw clip per video under
    /// `dir`; returns the manifest path. The manifest's base directory is
    /// set to `dir`.
    pub fn write(&mut self, dir: &Path) -> std::io::Result<PathBuf> {
        fs::create_dir_all(dir.join("clips"))?;
        for v in &self.manifest.videos {
            let frames = self.frames(&v.video_id).expect("params for every video");
            fs::write(dir.join(&v.path), encode_raw_clip_f32(&frames))?;
        }
        let path = dir.join("manifest.jsonl");
        fs::write(&path, self.manifest.to_jsonl())?;
        self.manifest.base_dir = dir.to_path_buf();
        Ok(path)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RatingSpec {
    pub observers: usize,
    pub videos: usize,
    pub seed: u64,
    /// `(observer index, fraction of conditions)` for a planted outlier
    /// observer whose ratings on those conditions are screened out.
    pub planted: Option<(usize, f64)>,
}

impl Default for RatingSpec {
    fn default() -> Self {
        Self { observers: 10, videos: 50, seed: 0, planted: None }
    }
}

/// Ratings on a 1..=5 scale for `observers x videos x 3` conditions.
///
/// Regular conditions: each observer rates `round(q + noise)` around a
/// per-condition latent `q`. Planted conditions: the other observers give
/// five 1s and the rest 3s, the planted observer gives 5. That set has
/// kurtosis ~2.29 (normal) and the 5 lies 2.8 from a mean of 2.2 with
/// sigma ~1.33, beyond 2 sigma, so it is always removed.
pub fn synthetic_ratings(spec: &RatingSpec) -> RatingMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let conditions: Vec<(usize, Dimension)> =
        (0..spec.videos).flat_map(|v| Dimension::ALL.into_iter().map(move |d| (v, d))).collect();
    let mut planted_set = std::collections::BTreeSet::new();
    if let Some((_, frac)) = spec.planted {
        let k = (frac * conditions.len() as f64).ceil() as usize;
        let mut idx: Vec<usize> = (0..conditions.len()).collect();
        idx.shuffle(&mut rng);
        planted_set.extend(idx.into_iter().take(k));
    }
    let observer = |o: usize| format!("obs{o:02}");
    let mut entries = Vec::with_capacity(conditions.len() * spec.observers);
    for (ci, &(v, dim)) in conditions.iter().enumerate() {
        let video_id = format!("vid{v:03}");
        if let (Some((planted, _)), true) = (spec.planted, planted_set.contains(&ci)) {
            let mut others: Vec<u8> = (0..spec.observers - 1).map(|i| if i < 5 { 1 } else { 3 }).collect();
            others.shuffle(&mut rng);
            let mut it = others.into_iter();
            for o in 0..spec.observers {
                let score = if o == planted { 5 } else { it.next().expect("one score per observer") };
                entries.push(Rating { observer_id: observer(o), video_id: video_id.clone(), dimension: dim, score });
            }
            continue;
        }
        let latent: f64 = rng.random_range(1.5..=4.5);
        for o in 0..spec.observers {
            let noise: f64 = rng.random_range(-0.6..=0.6);
            let score = (latent + noise).round().clamp(1.0, 5.0) as u8;
            entries.push(Rating { observer_id: observer(o), video_id: video_id.clone(), dimension: dim, score });
        }
    }
    RatingMatrix::new(entries).expect("generated ratings are valid")
}

/// CSV with the `observer_id,video_id,dimension,score` header.
pub fn ratings_to_csv(ratings: &RatingMatrix) -> String {
    let mut out = String::from("observer_id,video_id,dimension,score\n");
    for r in ratings.entries() {
        out.push_str(&format!("{},{},{},{}\n", r.observer_id, r.video_id, r.dimension.as_str(), r.score));
    }
    out
}
