use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use clap::Args;
use serde_json::json;
use ugvq::corpus::{DatasetManifest, VideoClip};
use ugvq::eval::{
    evaluate_scores, format_score_file, read_score_file, run_trials, samples_for, score_table, EvalReport, Level,
    SplitPlan, TrialConfig, TrialResult,
};
use ugvq::features::FeatureConfig;
use ugvq::model::Checkpoint;

use super::train::epoch_event;
use super::{eval_error, extract_features, load, model_error, prepare_out, require_file, required, write};
use crate::config::RunConfig;
use crate::events::EventLog;
use crate::{usage_error, Classify, CliResult};

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Evaluation manifest; overrides `eval_manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Model checkpoint written by `train`.
    #[arg(long, conflicts_with_all = ["scores", "trials"])]
    pub checkpoint: Option<PathBuf>,
    /// JSONL predictions: `{"video_id": .., "spatial": .., ...}` per line.
    #[arg(long, conflicts_with = "trials")]
    pub scores: Option<PathBuf>,
    /// Run the split/train/test protocol this many times (default:
    /// `eval.n_trials`). Used when neither a checkpoint nor scores are given.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Restrict to one evaluation level. Repeatable.
    #[arg(long)]
    pub level: Vec<Level>,
    /// Fit a 4-parameter logistic before PLCC.
    #[arg(long)]
    pub logistic: bool,
}

/// Writes `report.json` and `report.txt`; the trial protocol also writes
/// one report per trial under `trials/`, and checkpoint evaluation writes
/// the model's predictions as a score file.
pub fn run(mut cfg: RunConfig, args: EvaluateArgs) -> CliResult<()> {
    if args.manifest.is_some() {
        cfg.eval_manifest = args.manifest.clone();
    }
    if !args.level.is_empty() {
        let mut levels = args.level.clone();
        levels.dedup();
        cfg.eval.levels = levels;
    }
    if args.logistic {
        cfg.eval.logistic = true;
    }
    if let Some(n) = args.trials {
        cfg.eval.n_trials = n;
    }
    cfg.validate().usage()?;
    let manifest_path = required(cfg.eval_manifest(), "evaluation manifest", "eval_manifest")?.to_path_buf();
    if let Some(p) = args.checkpoint.as_deref().or(args.scores.as_deref()) {
        require_file(p, "input")?;
    }
    cfg.out().usage()?;
    let manifest = load(&manifest_path)?;

    let report = if let Some(path) = &args.scores {
        let scores = read_score_file(path).map_err(eval_error)?;
        let videos: Vec<&VideoClip> = manifest.videos.iter().collect();
        let cells = evaluate_scores(&manifest, &videos, &scores, &cfg.eval.options()).map_err(eval_error)?;
        let (out, log) = prepare_out(&cfg, "evaluate")?;
        log.finish().runtime()?;
        let report = EvalReport::from_trials("scores", vec![TrialResult { trial_id: 0, cells }], cfg.eval.logistic);
        (out, report)
    } else if let Some(path) = &args.checkpoint {
        evaluate_checkpoint(&cfg, &manifest, path)?
    } else {
        evaluate_trials(&cfg, &manifest)?
    };
    let (out, report) = report;
    write(&out.join("report.json"), report.to_json() + "\n")?;
    let table = report.render_table();
    write(&out.join("report.txt"), &table)?;
    print!("{table}");
    Ok(())
}

fn evaluate_checkpoint(cfg: &RunConfig, manifest: &DatasetManifest, path: &Path) -> CliResult<(PathBuf, EvalReport)> {
    let ck = Checkpoint::load(path).map_err(|e| usage_error(format!("checkpoint {}: {e}", path.display())))?;
    // The checkpoint's own feature settings, so input widths always match.
    let features: FeatureConfig = match ck.metadata.get("features") {
        Some(v) => serde_json::from_value(v.clone()).usage()?,
        None => cfg.features.clone(),
    };
    let split: Option<SplitPlan> = ck.metadata.get("split").and_then(|v| serde_json::from_value(v.clone()).ok());
    let prompts: BTreeSet<&str> = manifest.prompts.iter().map(|p| p.prompt_id.as_str()).collect();
    let (subset, videos): (&str, Vec<&VideoClip>) = match &split {
        Some(s) if s.test.iter().all(|p| prompts.contains(p.as_str())) => ("test split", s.videos(manifest, &s.test)),
        _ => ("all videos", manifest.videos.iter().collect()),
    };
    log::info!("evaluating {} on {} ({} videos)", path.display(), subset, videos.len());
    let model = ck.model().map_err(model_error)?;
    let bundles = extract_features(manifest, &features, cfg.cache_dir().as_deref())?;
    let samples = samples_for(manifest, &bundles, &videos, model.config()).map_err(eval_error)?;
    let refs: Vec<_> = samples.iter().collect();
    let scores = score_table(&model, &refs, cfg.train.batch_size).map_err(eval_error)?;
    let mut opts = cfg.eval.options();
    opts.dimensions.retain(|d| model.config().target_dimensions.contains(d));
    let cells = evaluate_scores(manifest, &videos, &scores, &opts).map_err(eval_error)?;

    let (out, mut log) = prepare_out(cfg, "evaluate")?;
    write(&out.join("predictions.jsonl"), format_score_file(&scores))?;
    log.emit("evaluate", json!({ "checkpoint": path, "subset": subset, "videos": videos.len() })).runtime()?;
    log.finish().runtime()?;
    let name = format!("checkpoint ({subset})");
    Ok((out, EvalReport::from_trials(name, vec![TrialResult { trial_id: 0, cells }], cfg.eval.logistic)))
}

fn evaluate_trials(cfg: &RunConfig, manifest: &DatasetManifest) -> CliResult<(PathBuf, EvalReport)> {
    let seed = cfg.seed().usage()?;
    let tc = TrialConfig {
        fusion: cfg.fusion(),
        train: cfg.train.clone(),
        seed,
        n_trials: cfg.eval.n_trials,
        eval: cfg.eval.options(),
    };
    let bundles = extract_features(manifest, &cfg.features, cfg.cache_dir().as_deref())?;
    let outcome = run_trials(manifest, &bundles, &tc, |t, m| {
        log::info!("trial {t} epoch {} lr {:e} train loss {:.4}", m.epoch, m.lr, m.train_loss);
    })
    .map_err(eval_error)?;

    let (out, mut log) = prepare_out(cfg, "evaluate")?;
    write_trials(&out, &mut log, &outcome.report, &outcome.splits, &outcome.histories)?;
    log.finish().runtime()?;
    Ok((out, outcome.report))
}

/// Epoch events in trial order, then one single-trial report per trial.
fn write_trials(
    out: &Path,
    log: &mut EventLog,
    report: &EvalReport,
    splits: &[SplitPlan],
    histories: &[Vec<ugvq::model::EpochMetrics>],
) -> CliResult<()> {
    for (t, h) in histories.iter().enumerate() {
        for m in h {
            log.emit("epoch", epoch_event(Some(t), m)).runtime()?;
        }
    }
    let dir = out.join("trials");
    std::fs::create_dir_all(&dir).runtime()?;
    for (trial, split) in report.trials.iter().zip(splits) {
        let single = EvalReport::from_trials(report.name.clone(), vec![trial.clone()], report.plcc_logistic);
        write(&dir.join(format!("trial-{:02}.json", trial.trial_id)), single.to_json() + "\n")?;
        write(
            &dir.join(format!("split-{:02}.json", split.trial_id)),
            serde_json::to_string_pretty(split).expect("split") + "\n",
        )?;
    }
    Ok(())
}
