pub mod benchmark;
pub mod evaluate;
pub mod ratings;
pub mod report;
pub mod train;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use ugvq::corpus::{load_manifest, DatasetManifest, FrameDecoder};
use ugvq::eval::EvalError;
use ugvq::features::{extract_all, BackboneRegistry, FeatureCache, FeatureConfig, FeatureError, FeatureExtractor};
use ugvq::model::ModelError;
use ugvq::FeatureBundle;

use crate::config::RunConfig;
use crate::events::EventLog;
use crate::{usage_error, Classify, Cli, CliError, CliResult, Command, ErrorKind};

pub fn dispatch(cli: Cli) -> CliResult<()> {
    let mut overrides = cli.global.overrides.clone();
    if let Some(seed) = cli.global.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(out) = &cli.global.out {
        overrides.push(format!("out={}", toml_string(out)));
    }
    if let Some(c) = &cli.global.config {
        require_file(c, "config")?;
    }
    let cfg = RunConfig::load(cli.global.config.as_deref(), &overrides).usage()?;
    match cli.command {
        Command::ProcessRatings(a) => ratings::run(cfg, a),
        Command::Train(a) => train::run(cfg, a),
        Command::Evaluate(a) => evaluate::run(cfg, a),
        Command::Benchmark(a) => benchmark::run(cfg, a),
        Command::Report(a) => report::run(cfg, a),
    }
}

/// Path as a quoted TOML string, so overrides survive any characters.
pub fn toml_string(p: &Path) -> String {
    toml::Value::String(p.to_string_lossy().into_owned()).to_string()
}

pub fn require_file(path: &Path, what: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(usage_error(format!("{what} {} does not exist or is not a file", path.display())))
    }
}

pub fn require_dir(path: &Path, what: &str) -> CliResult<()> {
    if path.is_dir() {
        Ok(())
    } else {
        Err(usage_error(format!("{what} {} does not exist or is not a directory", path.display())))
    }
}

pub fn required<'a>(p: Option<&'a Path>, what: &str, key: &str) -> CliResult<&'a Path> {
    let p = p.ok_or_else(|| usage_error(format!("no {what}: set `{key}` in the config or pass it as a flag")))?;
    require_file(p, what)?;
    Ok(p)
}

pub fn load(path: &Path) -> CliResult<DatasetManifest> {
    load_manifest(path).with_context(|| format!("loading manifest {}", path.display())).usage()
}

/// Output directory with the resolved configuration snapshot and a fresh
/// event log.
pub fn prepare_out(cfg: &RunConfig, command: &str) -> CliResult<(PathBuf, EventLog)> {
    let out = cfg.out().usage()?.to_path_buf();
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display())).runtime()?;
    write(&out.join("config.resolved.toml"), cfg.to_toml())?;
    let mut log = EventLog::create(&out.join("log.jsonl")).runtime()?;
    log.emit("start", serde_json::json!({ "command": command, "seed": cfg.seed })).runtime()?;
    Ok((out, log))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display())).runtime()
}

pub fn feature_error(e: FeatureError) -> CliError {
    let kind = match e {
        FeatureError::Io { .. } | FeatureError::Nn(_) | FeatureError::NonFinite(_) => ErrorKind::Runtime,
        _ => ErrorKind::Usage,
    };
    CliError { kind, error: e.into() }
}

pub fn model_error(e: ModelError) -> CliError {
    let kind = match e {
        ModelError::Config(_)
        | ModelError::NoFeatures
        | ModelError::EmptySplit(_)
        | ModelError::MissingTarget { .. } => ErrorKind::Usage,
        _ => ErrorKind::Runtime,
    };
    CliError { kind, error: e.into() }
}

/// Unmet preconditions on the inputs are usage errors; failures while
/// training or writing are runtime errors.
pub fn eval_error(e: EvalError) -> CliError {
    match e {
        EvalError::Features(f) => feature_error(f),
        EvalError::Model(m) => model_error(m),
        EvalError::Trial { .. } | EvalError::Io { .. } => CliError { kind: ErrorKind::Runtime, error: e.into() },
        _ => CliError { kind: ErrorKind::Usage, error: e.into() },
    }
}

/// Feature bundles for every video of `manifest`, through the on-disk
/// cache when one is configured.
pub fn extract_features(
    manifest: &DatasetManifest,
    features: &FeatureConfig,
    cache_dir: Option<&Path>,
) -> CliResult<BTreeMap<String, FeatureBundle>> {
    let extractor = FeatureExtractor::new(features, &BackboneRegistry::default()).map_err(feature_error)?;
    let cache = match cache_dir {
        Some(dir) => Some(FeatureCache::open(dir, &extractor.fingerprint()).map_err(feature_error)?),
        None => None,
    };
    let clips: Vec<_> = manifest.videos.iter().collect();
    let (bundles, stats) =
        extract_all(&extractor, &FrameDecoder::default(), manifest, &clips, cache.as_ref()).map_err(feature_error)?;
    log::info!(
        "features for {} videos: {} cached, {} encoded, {} recovered",
        clips.len(),
        stats.hits,
        stats.encoded,
        stats.recovered
    );
    Ok(clips.iter().map(|c| c.video_id.clone()).zip(bundles).collect())
}
