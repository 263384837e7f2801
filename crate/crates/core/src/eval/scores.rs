use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::dimension::Dimension;

/// Predicted scores per video and dimension.
pub type ScoreTable = BTreeMap<String, BTreeMap<Dimension, f64>>;

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScoreLine {
    video_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    spatial: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    temporal: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    alignment: Option<f64>,
}

/// JSONL, one `{"video_id", "spatial"?, "temporal"?, "alignment"?}` object
/// per line. Blank lines are skipped.
pub fn parse_score_file(text: &str) -> Result<ScoreTable, EvalError> {
    let mut table = ScoreTable::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let err = |message: String| EvalError::ScoreFile { line, message };
        let s: ScoreLine = serde_json::from_str(raw).map_err(|e| err(e.to_string()))?;
        if s.video_id.is_empty() {
            return Err(err("empty video_id".into()));
        }
        let mut row = BTreeMap::new();
        for (d, v) in
            [(Dimension::Spatial, s.spatial), (Dimension::Temporal, s.temporal), (Dimension::Alignment, s.alignment)]
        {
            if let Some(v) = v {
                if !v.is_finite() {
                    return Err(err(format!("non-finite {d} score")));
                }
                row.insert(d, v);
            }
        }
        if table.insert(s.video_id.clone(), row).is_some() {
            return Err(err(format!("duplicate video_id {:?}", s.video_id)));
        }
    }
    Ok(table)
}

pub fn read_score_file(path: &Path) -> Result<ScoreTable, EvalError> {
    let text = std::fs::read_to_string(path).map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
    parse_score_file(&text)
}

pub fn format_score_file(table: &ScoreTable) -> String {
    let mut out = String::new();
    for (video_id, row) in table {
        let line = ScoreLine {
            video_id: video_id.clone(),
            spatial: row.get(&Dimension::Spatial).copied(),
            temporal: row.get(&Dimension::Temporal).copied(),
            alignment: row.get(&Dimension::Alignment).copied(),
        };
        out.push_str(&serde_json::to_string(&line).expect("score line serialises"));
        out.push('\n');
    }
    out
}
