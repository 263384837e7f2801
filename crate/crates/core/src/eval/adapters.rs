use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::report::{evaluate_scores, Cell, EvalOptions, Level, Metric};
use super::scores::ScoreTable;
use super::EvalError;
use crate::corpus::{DatasetManifest, Frame, FrameDecoder, PromptRecord, VideoClip};
use crate::dimension::Dimension;

/// A zero-shot quality metric scoring `(video, prompt)` pairs.
pub trait MetricAdapter: Send + Sync {
    fn name(&self) -> &str;
    /// Dimensions the score is meant to predict.
    fn dimensions(&self) -> Vec<Dimension>;
    fn score(&self, frames: &[Frame], prompt: &PromptRecord) -> Result<f64, String>;
}

fn luma_values(f: &Frame) -> impl Iterator<Item = f64> + '_ {
    f.data.chunks_exact(3).map(|p| 0.299 * f64::from(p[0]) + 0.587 * f64::from(p[1]) + 0.114 * f64::from(p[2]))
}

/// Mean over frames of the per-frame luma variance.
pub struct FrameVariance;

impl MetricAdapter for FrameVariance {
    fn name(&self) -> &str {
        "frame-variance"
    }
    fn dimensions(&self) -> Vec<Dimension> {
        vec![Dimension::Spatial]
    }
    fn score(&self, frames: &[Frame], _: &PromptRecord) -> Result<f64, String> {
        if frames.is_empty() {
            return Err("no frames".into());
        }
        let per_frame = frames.iter().map(|f| {
            let n = (f.height * f.width) as f64;
            let mean = luma_values(f).sum::<f64>() / n;
            luma_values(f).map(|v| (v - mean).powi(2)).sum::<f64>() / n
        });
        Ok(per_frame.sum::<f64>() / frames.len() as f64)
    }
}

/// Negated mean squared luma difference between consecutive frames: high
/// for smooth clips, low for flickering ones.
pub struct FrameDiffEnergy;

impl MetricAdapter for FrameDiffEnergy {
    fn name(&self) -> &str {
        "frame-diff-energy"
    }
    fn dimensions(&self) -> Vec<Dimension> {
        vec![Dimension::Temporal]
    }
    fn score(&self, frames: &[Frame], _: &PromptRecord) -> Result<f64, String> {
        if frames.len() < 2 {
            return Err("needs at least 2 frames".into());
        }
        let energy: f64 = frames
            .windows(2)
            .map(|w| {
                let n = (w[0].height * w[0].width) as f64;
                luma_values(&w[0]).zip(luma_values(&w[1])).map(|(a, b)| (b - a).powi(2)).sum::<f64>() / n
            })
            .sum();
        Ok(-energy / (frames.len() - 1) as f64)
    }
}

/// Named adapters available to the benchmark.
pub struct AdapterRegistry {
    adapters: BTreeMap<String, Arc<dyn MetricAdapter>>,
}

impl Default for AdapterRegistry {
    fn default() -> Self {
        let mut r = Self { adapters: BTreeMap::new() };
        r.register(Arc::new(FrameVariance));
        r.register(Arc::new(FrameDiffEnergy));
        r
    }
}

impl AdapterRegistry {
    pub fn register(&mut self, a: Arc<dyn MetricAdapter>) {
        self.adapters.insert(a.name().to_string(), a);
    }

    pub fn names(&self) -> Vec<String> {
        self.adapters.keys().cloned().collect()
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn MetricAdapter>, EvalError> {
        self.adapters
            .get(name)
            .cloned()
            .ok_or_else(|| EvalError::UnknownAdapter { name: name.to_string(), available: self.names() })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum RowStatus {
    Ok { cells: Vec<Cell> },
    Failed { error: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkRow {
    pub adapter: String,
    pub dimensions: Vec<Dimension>,
    /// Some correlation is undefined (e.g. constant scores).
    pub degenerate: bool,
    #[serde(flatten)]
    pub status: RowStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub dimensions: Vec<Dimension>,
    pub levels: Vec<Level>,
    pub rows: Vec<BenchmarkRow>,
}

/// Scores every manifest video with every adapter and correlates against
/// MOS. A failing or panicking adapter only fails its own row.
pub fn adapter_benchmark(
    manifest: &DatasetManifest,
    decoder: &FrameDecoder,
    adapters: &[Arc<dyn MetricAdapter>],
    opts: &EvalOptions,
) -> Result<BenchmarkReport, EvalError> {
    let videos: Vec<&VideoClip> = manifest.videos.iter().collect();
    let mut frames = Vec::with_capacity(videos.len());
    for v in &videos {
        frames.push(decoder.frames(manifest, v)?);
    }
    let mut rows = Vec::new();
    for a in adapters {
        let dims: Vec<Dimension> = a.dimensions().into_iter().filter(|d| opts.dimensions.contains(d)).collect();
        if dims.is_empty() {
            continue;
        }
        let run = || -> Result<Vec<Cell>, String> {
            let mut table = ScoreTable::new();
            for (v, f) in videos.iter().zip(&frames) {
                let prompt = manifest.prompt(&v.prompt_id).ok_or_else(|| format!("no prompt for {}", v.video_id))?;
                let s = catch_unwind(AssertUnwindSafe(|| a.score(f, prompt)))
                    .map_err(|_| format!("panicked on {}", v.video_id))?
                    .map_err(|e| format!("{}: {e}", v.video_id))?;
                if !s.is_finite() {
                    return Err(format!("non-finite score for {}", v.video_id));
                }
                table.insert(v.video_id.clone(), dims.iter().map(|&d| (d, s)).collect());
            }
            let row_opts = EvalOptions { dimensions: dims.clone(), ..opts.clone() };
            evaluate_scores(manifest, &videos, &table, &row_opts).map_err(|e| e.to_string())
        };
        let row = match run() {
            Ok(cells) => BenchmarkRow {
                adapter: a.name().to_string(),
                dimensions: dims,
                degenerate: cells.iter().any(|c| c.values.is_degenerate()),
                status: RowStatus::Ok { cells },
            },
            Err(error) => {
                log::warn!("adapter {} failed: {error}", a.name());
                BenchmarkRow {
                    adapter: a.name().to_string(),
                    dimensions: dims,
                    degenerate: false,
                    status: RowStatus::Failed { error },
                }
            }
        };
        rows.push(row);
    }
    Ok(BenchmarkReport { dimensions: opts.dimensions.clone(), levels: opts.levels.clone(), rows })
}

impl BenchmarkReport {
    /// One row per adapter; columns are dimension x level x metric.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = write!(out, "{:<20}", "adapter");
        for d in &self.dimensions {
            for l in &self.levels {
                for m in Metric::ALL {
                    let _ = write!(out, " {:>16}", format!("{}/{}/{}", d.as_str(), l.as_str(), m.label()));
                }
            }
        }
        out.push('\n');
        for row in &self.rows {
            let mut name = row.adapter.clone();
            if row.degenerate {
                name.push_str(" [degenerate]");
            }
            let _ = write!(out, "{name:<20}");
            match &row.status {
                RowStatus::Failed { error } => {
                    let _ = write!(out, " failed: {error}");
                }
                RowStatus::Ok { cells } => {
                    for d in &self.dimensions {
                        for l in &self.levels {
                            let cell = cells.iter().find(|c| c.dimension == *d && c.level == *l);
                            for m in Metric::ALL {
                                let v = match cell {
                                    None => "-".to_string(),
                                    Some(c) => c.values.get(m).map_or("n/a".to_string(), |v| format!("{v:.4}")),
                                };
                                let _ = write!(out, " {v:>16}");
                            }
                        }
                    }
                }
            }
            out.push('\n');
        }
        out
    }
}
