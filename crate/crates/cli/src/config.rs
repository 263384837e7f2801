//! Run configuration: one TOML file, layered over built-in defaults, with
//! dotted `key=value` overrides from the command line.

use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};
use ugvq::eval::{EvalOptions, Level};
use ugvq::features::FeatureConfig;
use ugvq::model::{Ablation, FusionConfig, TrainConfig};
use ugvq::Dimension;

/// Overrides `cache_dir` from the config file.
pub const CACHE_DIR_ENV: &str = "UGVQ_CACHE_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSettings {
    pub n_trials: usize,
    pub levels: Vec<Level>,
    pub dimensions: Vec<Dimension>,
    /// Fit a 4-parameter logistic before PLCC.
    pub logistic: bool,
}

impl Default for EvalSettings {
    fn default() -> Self {
        Self { n_trials: 10, levels: Level::ALL.to_vec(), dimensions: Dimension::ALL.to_vec(), logistic: false }
    }
}

impl EvalSettings {
    pub fn options(&self) -> EvalOptions {
        EvalOptions { dimensions: self.dimensions.clone(), levels: self.levels.clone(), logistic: self.logistic }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Required by every command that trains or samples; never defaulted.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_manifest: Option<PathBuf>,
    /// Falls back to `train_manifest`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eval_manifest: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ratings: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
    /// Outlier screening before z-scoring ratings.
    pub screening: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ablation: Option<Ablation>,
    pub features: FeatureConfig,
    pub fusion: FusionConfig,
    pub train: TrainConfig,
    pub eval: EvalSettings,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: None,
            out: None,
            train_manifest: None,
            eval_manifest: None,
            ratings: None,
            cache_dir: None,
            screening: true,
            ablation: None,
            features: FeatureConfig::default(),
            fusion: FusionConfig::default(),
            train: TrainConfig::default(),
            eval: EvalSettings::default(),
        }
    }
}

fn merge(base: &mut Table, over: Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(Value::Table(b)), Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

/// TOML literal when it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> Value {
    toml::from_str::<Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

fn set_path(root: &mut Table, key: &str, value: Value) -> Result<()> {
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        bail!("invalid override key {key:?}");
    }
    let mut table = root;
    for part in &parts[..parts.len() - 1] {
        let entry = table.entry(part.to_string()).or_insert_with(|| Value::Table(Table::new()));
        table = entry.as_table_mut().ok_or_else(|| anyhow!("override {key:?}: {part:?} is not a table"))?;
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

impl RunConfig {
    /// Defaults, then `file`, then each `key=value` in `overrides`.
    pub fn load(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        match file {
            Some(path) => {
                let text =
                    std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
                Self::parse(Some(&text), overrides).with_context(|| format!("config {}", path.display()))
            }
            None => Self::parse(None, overrides),
        }
    }

    /// As [`RunConfig::load`], with the file already read.
    pub fn parse(text: Option<&str>, overrides: &[String]) -> Result<Self> {
        let mut table = match Value::try_from(RunConfig::default()).context("serialising defaults")? {
            Value::Table(t) => t,
            _ => unreachable!("config serialises to a table"),
        };
        if let Some(text) = text {
            let user: Table = toml::from_str(text).context("parsing TOML")?;
            merge(&mut table, user);
        }
        for o in overrides {
            let (k, v) = o.split_once('=').ok_or_else(|| anyhow!("override {o:?} is not key=value"))?;
            set_path(&mut table, k.trim(), parse_value(v.trim()))?;
        }
        let cfg: RunConfig = Value::Table(table).try_into().context("invalid configuration")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.fusion.validate()?;
        self.train.validate()?;
        if self.features.keyframes == 0 {
            bail!("features.keyframes must be positive");
        }
        if self.eval.n_trials == 0 || self.eval.levels.is_empty() || self.eval.dimensions.is_empty() {
            bail!("eval.n_trials, eval.levels and eval.dimensions must be non-empty");
        }
        Ok(())
    }

    /// Fusion settings with the ablation applied.
    pub fn fusion(&self) -> FusionConfig {
        match self.ablation {
            Some(a) => self.fusion.clone().with_ablation(a),
            None => self.fusion.clone(),
        }
    }

    pub fn seed(&self) -> Result<u64> {
        self.seed.ok_or_else(|| anyhow!("a seed is required: set `seed` in the config or pass --seed"))
    }

    pub fn out(&self) -> Result<&Path> {
        self.out.as_deref().ok_or_else(|| anyhow!("no output directory: set `out` in the config or pass --out"))
    }

    pub fn eval_manifest(&self) -> Option<&Path> {
        self.eval_manifest.as_deref().or(self.train_manifest.as_deref())
    }

    /// The environment variable wins over the config file.
    pub fn cache_dir(&self) -> Option<PathBuf> {
        std::env::var_os(CACHE_DIR_ENV).filter(|v| !v.is_empty()).map(PathBuf::from).or_else(|| self.cache_dir.clone())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_need_a_seed() {
        let c = RunConfig::load(None, &[]).unwrap();
        assert!(c.seed().is_err());
        assert_eq!(c.train.lr, 1e-5);
        assert_eq!(c.train.batch_size, 32);
    }

    #[test]
    fn overrides_are_typed_and_nested() {
        let c = RunConfig::load(
            None,
            &[
                "seed=7".into(),
                "train.lr=1e-3".into(),
                "fusion.model_dim=16".into(),
                "fusion.fused_dim=32".into(),
                "eval.levels=[\"video\"]".into(),
                "train_manifest=data/m.jsonl".into(),
                "ablation=spatial-text".into(),
            ],
        )
        .unwrap();
        assert_eq!(c.seed, Some(7));
        assert_eq!(c.train.lr, 1e-3);
        assert_eq!(c.fusion.model_dim, 16);
        assert_eq!(c.eval.levels, vec![Level::Video]);
        assert_eq!(c.train_manifest.as_deref(), Some(Path::new("data/m.jsonl")));
        assert_eq!(c.fusion().unified_width(), 64);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::load(None, &["train.learning_rate=1".into()]).is_err());
        assert!(RunConfig::load(None, &["nonsense".into()]).is_err());
        assert!(RunConfig::load(None, &["fusion.fused_dim=10".into()]).is_err());
    }

    #[test]
    fn snapshot_reloads_identically() {
        let c = RunConfig::load(None, &["seed=3".into(), "out=o".into()]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.toml");
        std::fs::write(&p, c.to_toml()).unwrap();
        assert_eq!(RunConfig::load(Some(&p), &[]).unwrap(), c);
    }
}
