//! Splits, correlation metrics, video- and model-level evaluation,
//! multi-trial runs and zero-shot metric benchmarks.

mod adapters;
mod correlation;
mod report;
mod scores;
mod splits;
mod trials;

use std::path::PathBuf;

pub use adapters::{
    adapter_benchmark, AdapterRegistry, BenchmarkReport, BenchmarkRow, FrameDiffEnergy, FrameVariance, MetricAdapter,
    RowStatus,
};
pub use correlation::{
    average_ranks, fit_logistic, krcc, pearson, plcc, srcc, CorrelationError, Logistic4, PlccMapping,
};
pub use report::{
    evaluate_scores, format_mean_std, mean_std, Cell, Correlations, EvalOptions, EvalReport, Level, Metric,
    SummaryCell, TrialResult, MODEL_LEVEL_AGGREGATION,
};
pub use scores::{format_score_file, parse_score_file, read_score_file, ScoreTable};
pub use splits::{make_splits, split_ids, split_sizes, SplitPlan, MIN_PROMPTS, SPLIT_RATIOS, SPLIT_TOLERANCE};
pub use trials::{run_trials, samples_for, score_table, trial_seed, TrialConfig, TrialsOutcome};

use crate::corpus::CorpusError;
use crate::dimension::Dimension;
use crate::features::FeatureError;
use crate::model::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid evaluation configuration: {0}")]
    Config(String),
    #[error("cannot split prompts: {0}")]
    Split(String),
    #[error("no {dimension} prediction for video {video_id}")]
    MissingPrediction { video_id: String, dimension: Dimension },
    #[error("no {dimension} MOS for video {video_id}")]
    MissingMos { video_id: String, dimension: Dimension },
    #[error("no features for video {0}")]
    MissingFeatures(String),
    #[error("model-level evaluation needs at least 2 models, found {0} (fewer than 2 models)")]
    TooFewModels(usize),
    #[error("evaluation needs at least 2 videos, found {0}")]
    TooFewVideos(usize),
    #[error("score file line {line}: {message}")]
    ScoreFile { line: usize, message: String },
    #[error("unknown adapter {name:?}; registered adapters: {}", available.join(", "))]
    UnknownAdapter { name: String, available: Vec<String> },
    #[error("trial {trial} failed: {message}")]
    Trial { trial: usize, message: String },
    #[error("malformed report: {0}")]
    Report(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
}
