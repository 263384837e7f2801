use std::collections::BTreeMap;

use super::{Rating, RatingMatrix};
use crate::Dimension;

#[derive(Debug, Clone, PartialEq)]
pub struct ZScoredRating {
    pub rating: Rating,
    pub z: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ZScores {
    pub entries: Vec<ZScoredRating>,
    pub zero_variance: Vec<(String, Dimension)>,
}

/// Per-observer, per-dimension z-scores with population statistics:
/// `z = (s - mean_i) / std_i`. Observers with zero variance in a dimension
/// get `z = 0` for those ratings and are listed in `zero_variance`.
pub fn zscore_normalize(ratings: &RatingMatrix) -> ZScores {
    let mut groups: BTreeMap<(&str, Dimension), Vec<&Rating>> = BTreeMap::new();
    for r in ratings.entries() {
        groups.entry((r.observer_id.as_str(), r.dimension)).or_default().push(r);
    }
    let mut stats: BTreeMap<(&str, Dimension), (f64, f64)> = BTreeMap::new();
    let mut zero_variance = Vec::new();
    for (&key, group) in &groups {
        let n = group.len() as f64;
        let mean = group.iter().map(|r| f64::from(r.score)).sum::<f64>() / n;
        let var = group.iter().map(|r| (f64::from(r.score) - mean).powi(2)).sum::<f64>() / n;
        if var == 0.0 {
            zero_variance.push((key.0.to_string(), key.1));
        }
        stats.insert(key, (mean, var.sqrt()));
    }
    let entries = ratings
        .entries()
        .iter()
        .map(|r| {
            let (mean, std) = stats[&(r.observer_id.as_str(), r.dimension)];
            let z = if std == 0.0 { 0.0 } else { (f64::from(r.score) - mean) / std };
            ZScoredRating { rating: r.clone(), z }
        })
        .collect();
    ZScores { entries, zero_variance }
}
