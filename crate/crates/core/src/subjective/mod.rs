//! Raw observer ratings to per-video, per-dimension MOS.
//!
//! The pipeline is: screen outlier ratings per test condition, drop
//! observers whose outlier share is too high, z-score each observer's
//! surviving ratings per dimension, average z across observers per
//! condition and map the clamped mean linearly onto `[0, 100]`.
//!
//! Every stage works on entries held in canonical `(observer, video,
//! dimension)` order, so floating-point sums are independent of the order
//! ratings arrived in.

mod mos;
mod ratings;
mod screening;
mod zscore;

use std::collections::BTreeSet;

use serde::Serialize;

pub use mos::{compute_mos, rescale, DimensionMos, MosRecord, Z_CLAMP};
pub use ratings::{parse_ratings_csv, read_ratings_csv, Rating, RatingMatrix, MAX_SCORE, MIN_SCORE};
pub use screening::{screen_outliers, NormalityFlag, NormalityTest, RatingKey, ScreeningOptions, ScreeningReport};
pub use zscore::{zscore_normalize, ZScoredRating, ZScores};

use crate::Dimension;

#[derive(Debug, thiserror::Error)]
pub enum SubjectiveError {
    #[error("no ratings")]
    Empty,
    #[error("score {score} for ({observer_id}, {video_id}, {dimension}) outside 1..=5")]
    ScoreRange { observer_id: String, video_id: String, dimension: Dimension, score: i64 },
    #[error("duplicate rating for ({observer_id}, {video_id}, {dimension})")]
    Duplicate { observer_id: String, video_id: String, dimension: Dimension },
    #[error("condition ({video_id}, {dimension}) has {count} rating(s); screening needs at least 2")]
    TooFewRatings { video_id: String, dimension: Dimension, count: usize },
    #[error("ratings csv line {line}: {message}")]
    Csv { line: u64, message: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A `(video, dimension)` test condition.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct Condition {
    pub video_id: String,
    pub dimension: Dimension,
}

#[derive(Debug, Clone, Default)]
pub struct MosOptions {
    /// `None` skips outlier screening entirely.
    pub screening: Option<ScreeningOptions>,
}

impl MosOptions {
    pub fn with_screening() -> Self {
        Self { screening: Some(ScreeningOptions::default()) }
    }
}

#[derive(Debug, Clone)]
pub struct MosOutcome {
    pub records: Vec<MosRecord>,
    pub report: ScreeningReport,
}

/// Runs screening (when enabled), z-score normalisation and MOS
/// computation. Conditions that lose every rating are listed in
/// `report.omitted_conditions` and carry no MOS.
pub fn process_ratings(ratings: &RatingMatrix, opts: &MosOptions) -> Result<MosOutcome, SubjectiveError> {
    if ratings.is_empty() {
        return Err(SubjectiveError::Empty);
    }
    let (cleaned, mut report) = match &opts.screening {
        Some(s) => screen_outliers(ratings, s)?,
        None => (ratings.clone(), ScreeningReport::default()),
    };
    let z = zscore_normalize(&cleaned);
    report.zero_variance = z.zero_variance.clone();
    let records = compute_mos(&z);

    let emitted: BTreeSet<Condition> = records
        .iter()
        .flat_map(|r| r.dimensions.keys().map(move |&d| Condition { video_id: r.video_id.clone(), dimension: d }))
        .collect();
    report.omitted_conditions = ratings.conditions().into_iter().filter(|c| !emitted.contains(c)).collect();
    Ok(MosOutcome { records, report })
}
