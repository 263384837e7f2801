use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::{Condition, Rating, RatingMatrix, SubjectiveError};
use crate::Dimension;

/// How a condition's score distribution is classified before choosing the
/// outlier threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum NormalityTest {
    /// Normal when the (non-excess) sample kurtosis lies in `[low, high]`.
    Kurtosis {
        low: f64,
        high: f64,
    },
    AssumeNormal,
    AssumeNonNormal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScreeningOptions {
    pub normality: NormalityTest,
    /// Threshold in standard deviations for normally distributed conditions.
    pub normal_k: f64,
    /// Threshold in standard deviations otherwise.
    pub non_normal_k: f64,
    /// Observers whose outlier share exceeds this are dropped.
    pub max_outlier_fraction: f64,
}

impl Default for ScreeningOptions {
    fn default() -> Self {
        Self {
            normality: NormalityTest::Kurtosis { low: 2.0, high: 4.0 },
            normal_k: 2.0,
            non_normal_k: 20f64.sqrt(),
            max_outlier_fraction: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct RatingKey {
    pub observer_id: String,
    pub video_id: String,
    pub dimension: Dimension,
}

impl From<&Rating> for RatingKey {
    fn from(r: &Rating) -> Self {
        Self { observer_id: r.observer_id.clone(), video_id: r.video_id.clone(), dimension: r.dimension }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NormalityFlag {
    pub video_id: String,
    pub dimension: Dimension,
    pub normal: bool,
    /// `None` when the condition has zero variance.
    pub kurtosis: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ScreeningReport {
    pub removed_ratings: Vec<RatingKey>,
    pub rejected_observers: Vec<String>,
    pub normality_flags: Vec<NormalityFlag>,
    /// Outlier share per observer: outlier ratings / all ratings given.
    pub observer_outlier_fraction: BTreeMap<String, f64>,
    /// `(observer, dimension)` pairs whose surviving ratings have zero
    /// variance; their z-scores are defined as 0.
    pub zero_variance: Vec<(String, Dimension)>,
    pub omitted_conditions: Vec<Condition>,
}

struct ConditionStats {
    mean: f64,
    std: f64,
    kurtosis: Option<f64>,
}

fn condition_stats(scores: &[f64]) -> ConditionStats {
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let m2 = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    let m4 = scores.iter().map(|s| (s - mean).powi(4)).sum::<f64>() / n;
    let kurtosis = (m2 > 0.0).then(|| m4 / (m2 * m2));
    ConditionStats { mean, std: m2.sqrt(), kurtosis }
}

/// Single-pass outlier screening. Condition statistics are computed once on
/// the input; a rating is an outlier when `|s - mean| > k * std` with `k`
/// chosen by the condition's normality class. Observers whose outlier share
/// exceeds `max_outlier_fraction` lose all their ratings.
pub fn screen_outliers(
    ratings: &RatingMatrix,
    opts: &ScreeningOptions,
) -> Result<(RatingMatrix, ScreeningReport), SubjectiveError> {
    if ratings.is_empty() {
        return Err(SubjectiveError::Empty);
    }
    let mut by_condition: BTreeMap<(&str, Dimension), Vec<usize>> = BTreeMap::new();
    for (i, r) in ratings.entries().iter().enumerate() {
        by_condition.entry((r.video_id.as_str(), r.dimension)).or_default().push(i);
    }

    let mut report = ScreeningReport::default();
    let mut outlier = vec![false; ratings.len()];
    for (&(video_id, dimension), idx) in &by_condition {
        if idx.len() < 2 {
            return Err(SubjectiveError::TooFewRatings { video_id: video_id.to_string(), dimension, count: idx.len() });
        }
        let scores: Vec<f64> = idx.iter().map(|&i| f64::from(ratings.entries()[i].score)).collect();
        let stats = condition_stats(&scores);
        let normal = match opts.normality {
            NormalityTest::AssumeNormal => true,
            NormalityTest::AssumeNonNormal => false,
            // Zero variance: every rating equals the mean, so the class is moot.
            NormalityTest::Kurtosis { low, high } => stats.kurtosis.is_none_or(|k| (low..=high).contains(&k)),
        };
        let k = if normal { opts.normal_k } else { opts.non_normal_k };
        for (&i, s) in idx.iter().zip(&scores) {
            if (s - stats.mean).abs() > k * stats.std {
                outlier[i] = true;
            }
        }
        report.normality_flags.push(NormalityFlag {
            video_id: video_id.to_string(),
            dimension,
            normal,
            kurtosis: stats.kurtosis,
        });
    }

    let mut totals: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    for (r, &is_out) in ratings.entries().iter().zip(&outlier) {
        let t = totals.entry(r.observer_id.as_str()).or_default();
        t.0 += usize::from(is_out);
        t.1 += 1;
    }
    let mut rejected = BTreeSet::new();
    for (&obs, &(out, total)) in &totals {
        let fraction = out as f64 / total as f64;
        report.observer_outlier_fraction.insert(obs.to_string(), fraction);
        if fraction > opts.max_outlier_fraction {
            rejected.insert(obs);
        }
    }

    let mut kept = Vec::with_capacity(ratings.len());
    for (r, &is_out) in ratings.entries().iter().zip(&outlier) {
        if is_out {
            report.removed_ratings.push(RatingKey::from(r));
        } else if !rejected.contains(r.observer_id.as_str()) {
            kept.push(r.clone());
        }
    }
    report.rejected_observers = rejected.into_iter().map(str::to_string).collect();
    Ok((RatingMatrix::from_sorted_unchecked(kept), report))
}
