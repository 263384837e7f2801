use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::correlation::{krcc, plcc, srcc, PlccMapping};
use super::scores::ScoreTable;
use super::EvalError;
use crate::corpus::{DatasetManifest, VideoClip};
use crate::dimension::Dimension;

/// Model-level aggregation, recorded in every report.
pub const MODEL_LEVEL_AGGREGATION: &str = "arithmetic mean of per-video predictions and MOS per generator model";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Level {
    Video,
    Model,
}

impl Level {
    pub const ALL: [Level; 2] = [Level::Video, Level::Model];

    pub fn as_str(self) -> &'static str {
        match self {
            Level::Video => "video",
            Level::Model => "model",
        }
    }
}

impl FromStr for Level {
    type Err = EvalError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "video" => Ok(Level::Video),
            "model" => Ok(Level::Model),
            _ => Err(EvalError::Config(format!("unknown level {s:?}; expected video or model"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Srcc,
    Krcc,
    Plcc,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Srcc, Metric::Krcc, Metric::Plcc];

    pub fn label(self) -> &'static str {
        match self {
            Metric::Srcc => "SRCC",
            Metric::Krcc => "KRCC",
            Metric::Plcc => "PLCC",
        }
    }
}

/// The three coefficients over one set of points; `None` where undefined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Correlations {
    pub points: usize,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
    pub plcc: Option<f64>,
    pub plcc_mapping: Option<PlccMapping>,
}

impl Correlations {
    pub fn compute(pred: &[f64], mos: &[f64], logistic: bool) -> Self {
        let p = plcc(pred, mos, logistic).ok();
        Self {
            points: pred.len(),
            srcc: srcc(pred, mos).ok(),
            krcc: krcc(pred, mos).ok(),
            plcc: p.map(|(v, _)| v),
            plcc_mapping: p.map(|(_, m)| m),
        }
    }

    pub fn get(&self, m: Metric) -> Option<f64> {
        match m {
            Metric::Srcc => self.srcc,
            Metric::Krcc => self.krcc,
            Metric::Plcc => self.plcc,
        }
    }

    pub fn is_degenerate(&self) -> bool {
        self.srcc.is_none() || self.krcc.is_none() || self.plcc.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub level: Level,
    pub dimension: Dimension,
    #[serde(flatten)]
    pub values: Correlations,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalOptions {
    pub dimensions: Vec<Dimension>,
    pub levels: Vec<Level>,
    pub logistic: bool,
}

impl Default for EvalOptions {
    fn default() -> Self {
        Self { dimensions: Dimension::ALL.to_vec(), levels: Level::ALL.to_vec(), logistic: false }
    }
}

/// Correlates predictions with MOS over `videos`, at each requested level
/// and dimension. Results do not depend on the order of `videos`.
pub fn evaluate_scores(
    manifest: &DatasetManifest,
    videos: &[&VideoClip],
    scores: &ScoreTable,
    opts: &EvalOptions,
) -> Result<Vec<Cell>, EvalError> {
    let mut sorted: Vec<&VideoClip> = videos.to_vec();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    if sorted.len() < 2 {
        return Err(EvalError::TooFewVideos(sorted.len()));
    }
    let mut cells = Vec::new();
    for &level in &opts.levels {
        for &dim in &opts.dimensions {
            let mut rows: Vec<(&str, f64, f64)> = Vec::with_capacity(sorted.len());
            for v in &sorted {
                let pred = scores
                    .get(&v.video_id)
                    .and_then(|s| s.get(&dim))
                    .ok_or_else(|| EvalError::MissingPrediction { video_id: v.video_id.clone(), dimension: dim })?;
                let mos = manifest
                    .mos_for(&v.video_id)
                    .and_then(|m| m.get(dim))
                    .ok_or_else(|| EvalError::MissingMos { video_id: v.video_id.clone(), dimension: dim })?;
                rows.push((v.model_name.as_str(), *pred, mos));
            }
            let (pred, mos): (Vec<f64>, Vec<f64>) = match level {
                Level::Video => rows.iter().map(|r| (r.1, r.2)).unzip(),
                Level::Model => {
                    let mut groups: BTreeMap<&str, (f64, f64, usize)> = BTreeMap::new();
                    for (m, p, q) in rows {
                        let g = groups.entry(m).or_default();
                        g.0 += p;
                        g.1 += q;
                        g.2 += 1;
                    }
                    if groups.len() < 2 {
                        return Err(EvalError::TooFewModels(groups.len()));
                    }
                    groups.values().map(|&(p, q, n)| (p / n as f64, q / n as f64)).unzip()
                }
            };
            cells.push(Cell { level, dimension: dim, values: Correlations::compute(&pred, &mos, opts.logistic) });
        }
    }
    Ok(cells)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub trial_id: usize,
    pub cells: Vec<Cell>,
}

/// Mean and population standard deviation over the trials where the
/// value is defined.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryCell {
    pub level: Level,
    pub dimension: Dimension,
    pub metric: Metric,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub defined: usize,
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub name: String,
    pub model_level_aggregation: String,
    pub plcc_logistic: bool,
    pub trial_count: usize,
    pub trials: Vec<TrialResult>,
    pub summary: Vec<SummaryCell>,
}

impl EvalReport {
    /// Trials are ordered by id; the summary follows the cell order of the
    /// first trial.
    pub fn from_trials(name: impl Into<String>, mut trials: Vec<TrialResult>, plcc_logistic: bool) -> Self {
        trials.sort_by_key(|t| t.trial_id);
        let mut summary = Vec::new();
        if let Some(first) = trials.first() {
            for cell in &first.cells {
                for metric in Metric::ALL {
                    let vals: Vec<f64> = trials
                        .iter()
                        .filter_map(|t| t.cells.iter().find(|c| c.level == cell.level && c.dimension == cell.dimension))
                        .filter_map(|c| c.values.get(metric))
                        .collect();
                    let ms = mean_std(&vals);
                    summary.push(SummaryCell {
                        level: cell.level,
                        dimension: cell.dimension,
                        metric,
                        mean: ms.map(|m| m.0),
                        std: ms.map(|m| m.1),
                        defined: vals.len(),
                    });
                }
            }
        }
        Self {
            name: name.into(),
            model_level_aggregation: MODEL_LEVEL_AGGREGATION.to_string(),
            plcc_logistic,
            trial_count: trials.len(),
            trials,
            summary,
        }
    }

    pub fn summary_for(&self, level: Level, dimension: Dimension, metric: Metric) -> Option<&SummaryCell> {
        self.summary.iter().find(|s| s.level == level && s.dimension == dimension && s.metric == metric)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, EvalError> {
        serde_json::from_str(text).map_err(|e| EvalError::Report(e.to_string()))
    }

    /// Plain-text table: one row per (dimension, level), columns SRCC,
    /// KRCC, PLCC as `mean±std`.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} | trials: {} | PLCC: {} | model level: {}",
            self.name,
            self.trial_count,
            if self.plcc_logistic { "logistic-mapped" } else { "raw" },
            self.model_level_aggregation
        );
        let _ = writeln!(out, "{:<10} {:<6} {:>17} {:>17} {:>17}", "dimension", "level", "SRCC", "KRCC", "PLCC");
        let mut keys: Vec<(Dimension, Level)> = Vec::new();
        for s in &self.summary {
            if !keys.contains(&(s.dimension, s.level)) {
                keys.push((s.dimension, s.level));
            }
        }
        for (d, l) in keys {
            let _ = write!(out, "{:<10} {:<6}", d.as_str(), l.as_str());
            for m in Metric::ALL {
                let cell = self.summary_for(l, d, m).map(format_mean_std).unwrap_or_else(|| "n/a".into());
                let _ = write!(out, " {cell:>17}");
            }
            out.push('\n');
        }
        out
    }
}

pub fn format_mean_std(s: &SummaryCell) -> String {
    match (s.mean, s.std) {
        (Some(m), Some(sd)) => format!("{m:.4}±{sd:.4}"),
        _ => "n/a".to_string(),
    }
}
