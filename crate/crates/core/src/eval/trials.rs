use std::collections::BTreeMap;

use rayon::prelude::*;

use super::report::{evaluate_scores, EvalOptions, EvalReport, TrialResult};
use super::scores::ScoreTable;
use super::splits::{make_splits, SplitPlan};
use super::EvalError;
use crate::corpus::{DatasetManifest, VideoClip};
use crate::features::FeatureBundle;
use crate::model::{
    predict_all, EpochMetrics, FusionConfig, InputDims, QualityTriple, Sample, TrainConfig, Trainer, UgvqModel,
};

/// Seed of trial `t`; trial 0 uses the run seed itself.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    seed ^ (trial as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

fn refs(v: &[Sample]) -> Vec<&Sample> {
    v.iter().collect()
}

/// Labelled samples for `videos`, in the given order.
pub fn samples_for(
    manifest: &DatasetManifest,
    bundles: &BTreeMap<String, FeatureBundle>,
    videos: &[&VideoClip],
    fusion: &FusionConfig,
) -> Result<Vec<Sample>, EvalError> {
    videos
        .iter()
        .map(|v| {
            let bundle =
                bundles.get(&v.video_id).ok_or_else(|| EvalError::MissingFeatures(v.video_id.clone()))?.clone();
            let mos = manifest.mos_for(&v.video_id).ok_or_else(|| EvalError::MissingMos {
                video_id: v.video_id.clone(),
                dimension: fusion.target_dimensions[0],
            })?;
            let target = QualityTriple::target(mos, &fusion.target_dimensions)?;
            Ok(Sample { video_id: v.video_id.clone(), bundle, target })
        })
        .collect()
}

/// Model predictions as a score table keyed by video id.
pub fn score_table(model: &UgvqModel, samples: &[&Sample], chunk: usize) -> Result<ScoreTable, EvalError> {
    let pred = predict_all(model, samples, chunk)?;
    let dims = &model.config().target_dimensions;
    Ok(samples
        .iter()
        .enumerate()
        .map(|(i, s)| (s.video_id.clone(), dims.iter().enumerate().map(|(d, &dim)| (dim, pred[[i, d]])).collect()))
        .collect())
}

#[derive(Debug, Clone)]
pub struct TrialConfig {
    pub fusion: FusionConfig,
    pub train: TrainConfig,
    pub seed: u64,
    pub n_trials: usize,
    pub eval: EvalOptions,
}

#[derive(Debug, Clone)]
pub struct TrialsOutcome {
    pub report: EvalReport,
    pub splits: Vec<SplitPlan>,
    /// Epoch history per trial, by trial id.
    pub histories: Vec<Vec<EpochMetrics>>,
}

/// Split, train with best-validation selection and evaluate on the test
/// prompts, for every trial. Trials run concurrently; results are ordered
/// by trial id.
pub fn run_trials(
    manifest: &DatasetManifest,
    bundles: &BTreeMap<String, FeatureBundle>,
    cfg: &TrialConfig,
    on_epoch: impl Fn(usize, &EpochMetrics) + Sync,
) -> Result<TrialsOutcome, EvalError> {
    let splits = make_splits(manifest, cfg.n_trials, cfg.seed)?;
    let dims =
        bundles.values().next().map(InputDims::of).ok_or_else(|| EvalError::Config("no feature bundles".into()))?;
    let eval_dims: Vec<_> =
        cfg.eval.dimensions.iter().copied().filter(|d| cfg.fusion.target_dimensions.contains(d)).collect();
    let opts = EvalOptions { dimensions: eval_dims, ..cfg.eval.clone() };
    let results = splits
        .par_iter()
        .map(|plan| {
            let t = plan.trial_id;
            let wrap = |e: EvalError| EvalError::Trial { trial: t, message: e.to_string() };
            let run = || -> Result<(TrialResult, Vec<EpochMetrics>), EvalError> {
                let seed = trial_seed(cfg.seed, t);
                let part = |ids: &[String]| samples_for(manifest, bundles, &plan.videos(manifest, ids), &cfg.fusion);
                let (train, val, test) = (part(&plan.train)?, part(&plan.val)?, part(&plan.test)?);
                let model = UgvqModel::new(cfg.fusion.clone(), dims, seed)?;
                let mut trainer = Trainer::new(model, cfg.train.clone(), seed)?;
                trainer.fit(&refs(&train), &refs(&val), |_, m| on_epoch(t, m))?;
                let best = trainer.best_model();
                let scores = score_table(&best, &refs(&test), cfg.train.batch_size)?;
                let test_videos = plan.videos(manifest, &plan.test);
                let cells = evaluate_scores(manifest, &test_videos, &scores, &opts)?;
                Ok((TrialResult { trial_id: t, cells }, trainer.history().to_vec()))
            };
            run().map_err(wrap)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let (trials, histories): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    Ok(TrialsOutcome { report: EvalReport::from_trials("ugvq", trials, cfg.eval.logistic), splits, histories })
}
