use std::collections::BTreeMap;

use serde::Serialize;

use super::ZScores;
use crate::corpus::MosEntry;
use crate::Dimension;

/// Mean z-scores are clamped to `[-Z_CLAMP, Z_CLAMP]` before rescaling.
pub const Z_CLAMP: f64 = 3.0;

/// Linear map of a mean z-score onto `[0, 100]`.
pub fn rescale(mean_z: f64) -> f64 {
    100.0 * (mean_z.clamp(-Z_CLAMP, Z_CLAMP) + Z_CLAMP) / (2.0 * Z_CLAMP)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DimensionMos {
    pub mos: f64,
    pub rater_count: usize,
    /// Spread of the individual z-scores, in MOS units (`100 / 6` per z).
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MosRecord {
    pub video_id: String,
    pub dimensions: BTreeMap<Dimension, DimensionMos>,
}

impl From<&MosRecord> for MosEntry {
    fn from(r: &MosRecord) -> Self {
        let mut e = MosEntry {
            video_id: r.video_id.clone(),
            spatial: None,
            temporal: None,
            alignment: None,
            rater_count: BTreeMap::new(),
            std: BTreeMap::new(),
        };
        for (&d, m) in &r.dimensions {
            e.set(d, Some(m.mos));
            e.rater_count.insert(d, m.rater_count);
            e.std.insert(d, m.std);
        }
        e
    }
}

/// Averages z-scores per `(video, dimension)` and rescales to `[0, 100]`.
/// Records come out sorted by video id.
pub fn compute_mos(z: &ZScores) -> Vec<MosRecord> {
    let mut groups: BTreeMap<&str, BTreeMap<Dimension, Vec<f64>>> = BTreeMap::new();
    for e in &z.entries {
        groups.entry(e.rating.video_id.as_str()).or_default().entry(e.rating.dimension).or_default().push(e.z);
    }
    groups
        .into_iter()
        .map(|(video_id, dims)| MosRecord {
            video_id: video_id.to_string(),
            dimensions: dims
                .into_iter()
                .map(|(d, zs)| {
                    let n = zs.len() as f64;
                    let mean = zs.iter().sum::<f64>() / n;
                    let var = zs.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
                    let scale = 100.0 / (2.0 * Z_CLAMP);
                    (d, DimensionMos { mos: rescale(mean), rater_count: zs.len(), std: var.sqrt() * scale })
                })
                .collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rescale_endpoints() {
        assert_eq!(rescale(0.0), 50.0);
        assert_eq!(rescale(3.0), 100.0);
        assert_eq!(rescale(-3.0), 0.0);
        assert_eq!(rescale(7.5), 100.0);
        assert_eq!(rescale(-4.0), 0.0);
    }
}
