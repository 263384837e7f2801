use std::path::PathBuf;

use clap::Args;
use serde_json::json;
use ugvq::eval::{make_splits, samples_for, SplitPlan};
use ugvq::model::{Ablation, Checkpoint, EpochMetrics, InputDims, Trainer, UgvqModel};

use super::{eval_error, extract_features, load, model_error, prepare_out, required, write};
use crate::config::RunConfig;
use crate::{Classify, CliResult};

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training manifest; overrides `train_manifest`.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    /// Feature subset to train on.
    #[arg(long)]
    pub ablation: Option<Ablation>,
    /// Validate inputs and print the run header without training.
    #[arg(long)]
    pub dry_run: bool,
}

/// One line summarising the hyperparameters that shape the run.
pub fn header(cfg: &RunConfig) -> String {
    let fusion = cfg.fusion();
    format!(
        "lr {:e} | decay x{} every {} epochs | epochs {} | batch {} | N_s {} | D {} | F_q width {} | ablation {} | seed {}",
        cfg.train.lr,
        cfg.train.lr_decay_factor,
        cfg.train.lr_decay_every,
        cfg.train.epochs,
        cfg.train.batch_size,
        cfg.features.keyframes,
        fusion.model_dim,
        fusion.unified_width(),
        cfg.ablation.unwrap_or(Ablation::Full),
        cfg.seed.map_or_else(|| "unset".to_string(), |s| s.to_string()),
    )
}

pub fn epoch_event(trial: Option<usize>, m: &EpochMetrics) -> serde_json::Value {
    json!({
        "trial": trial,
        "epoch": m.epoch,
        "lr": m.lr,
        "train_loss": m.train_loss,
        "val_loss": m.val_loss,
        "val_srcc": m.val_srcc,
        "val_srcc_mean": m.val_srcc_mean,
        "selected": m.selected,
    })
}

/// Trains on the train prompts of split 0 and selects the epoch with the
/// best validation SRCC. Writes `model.ckpt` (selected weights),
/// `state.ckpt` (resumable state), `history.json` and `split.json`.
pub fn run(mut cfg: RunConfig, args: TrainArgs) -> CliResult<()> {
    if args.manifest.is_some() {
        cfg.train_manifest = args.manifest;
    }
    if args.ablation.is_some() {
        cfg.ablation = args.ablation;
    }
    let manifest_path = required(cfg.train_manifest.as_deref(), "training manifest", "train_manifest")?.to_path_buf();
    let seed = cfg.seed().usage()?;
    cfg.out().usage()?;
    println!("train | {}", header(&cfg));
    if args.dry_run {
        print!("{}", cfg.to_toml());
        return Ok(());
    }

    let manifest = load(&manifest_path)?;
    let split: SplitPlan = make_splits(&manifest, 1, seed).map_err(eval_error)?.remove(0);
    let fusion = cfg.fusion();
    let bundles = extract_features(&manifest, &cfg.features, cfg.cache_dir().as_deref())?;
    let part = |ids: &[String]| samples_for(&manifest, &bundles, &split.videos(&manifest, ids), &fusion);
    let train = part(&split.train).map_err(eval_error)?;
    let val = part(&split.val).map_err(eval_error)?;

    let (out, mut log) = prepare_out(&cfg, "train")?;
    let dims = InputDims::of(&train[0].bundle);
    let model = UgvqModel::new(fusion.clone(), dims, seed).map_err(model_error)?;
    let mut trainer = Trainer::new(model, cfg.train.clone(), seed).map_err(model_error)?;
    let train_refs: Vec<_> = train.iter().collect();
    let val_refs: Vec<_> = val.iter().collect();
    let mut log_error = None;
    let result = trainer.fit(&train_refs, &val_refs, |_, m| {
        log::info!(
            "epoch {} lr {:e} train loss {:.4} val srcc {}",
            m.epoch,
            m.lr,
            m.train_loss,
            m.val_srcc_mean.map_or("n/a".into(), |s| format!("{s:.4}"))
        );
        if let Err(e) = log.emit("epoch", epoch_event(None, m)) {
            log_error.get_or_insert(e);
        }
    });
    if let Some(e) = log_error {
        return Err(e).runtime();
    }
    result.map_err(model_error)?;

    let metadata = json!({
        "features": cfg.features,
        "split": split,
        "manifest": manifest_path,
        "ablation": cfg.ablation.unwrap_or(Ablation::Full),
    });
    Checkpoint::selected(&trainer, metadata.clone()).save(&out.join("model.ckpt")).map_err(model_error)?;
    Checkpoint::from_trainer(&trainer, metadata).save(&out.join("state.ckpt")).map_err(model_error)?;
    write(&out.join("history.json"), serde_json::to_string_pretty(trainer.history()).expect("history") + "\n")?;
    write(&out.join("split.json"), serde_json::to_string_pretty(&split).expect("split") + "\n")?;
    let best = trainer.best().map(|b| (b.epoch, b.score));
    log.emit("done", json!({ "best_epoch": best.map(|b| b.0), "best_val_srcc": best.and_then(|b| b.1) })).runtime()?;
    log.finish().runtime()?;
    println!(
        "trained {} epochs on {} videos; selected epoch {}",
        trainer.epoch(),
        train.len(),
        best.map_or("none".into(), |b| b.0.to_string())
    );
    Ok(())
}
