use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::corpus::{DatasetManifest, VideoClip};

/// Target train/val/test fractions.
pub const SPLIT_RATIOS: [f64; 3] = [0.7, 0.1, 0.2];
/// Largest allowed deviation of a realised fraction from its target.
pub const SPLIT_TOLERANCE: f64 = 0.02;
pub const MIN_PROMPTS: usize = 10;

/// Prompt-level partition for one trial; videos follow their prompt.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub trial_id: usize,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

impl SplitPlan {
    pub fn ratios(&self) -> [f64; 3] {
        let n = (self.train.len() + self.val.len() + self.test.len()) as f64;
        [self.train.len() as f64 / n, self.val.len() as f64 / n, self.test.len() as f64 / n]
    }

    /// Videos of `manifest` whose prompt is in the given part, in manifest order.
    pub fn videos<'m>(&self, manifest: &'m DatasetManifest, part: &[String]) -> Vec<&'m VideoClip> {
        let set: BTreeSet<&str> = part.iter().map(String::as_str).collect();
        manifest.videos.iter().filter(|v| set.contains(v.prompt_id.as_str())).collect()
    }
}

fn max_deviation(sizes: [usize; 3], n: usize) -> f64 {
    (0..3).map(|i| (sizes[i] as f64 / n as f64 - SPLIT_RATIOS[i]).abs()).fold(0.0, f64::max)
}

/// Part sizes for `n` prompts minimising the largest deviation from
/// 7:1:2, every part non-empty. Errors when no allocation is within
/// tolerance.
pub fn split_sizes(n: usize) -> Result<[usize; 3], EvalError> {
    if n < MIN_PROMPTS {
        return Err(EvalError::Split(format!("{n} prompts; at least {MIN_PROMPTS} are needed")));
    }
    let around = |r: f64| {
        let c = (r * n as f64).round() as i64;
        (c - 2..=c + 2).filter(|&v| v >= 1).map(|v| v as usize)
    };
    let mut best: Option<([usize; 3], f64)> = None;
    for tr in around(SPLIT_RATIOS[0]) {
        for va in around(SPLIT_RATIOS[1]) {
            if tr + va >= n {
                continue;
            }
            let sizes = [tr, va, n - tr - va];
            let dev = max_deviation(sizes, n);
            if best.is_none_or(|(_, d)| dev < d) {
                best = Some((sizes, dev));
            }
        }
    }
    match best {
        Some((sizes, dev)) if dev <= SPLIT_TOLERANCE + 1e-12 => Ok(sizes),
        Some((sizes, dev)) => Err(EvalError::Split(format!(
            "{n} prompts cannot be split within {} points of 7:1:2 (closest {:?} deviates by {:.1} points)",
            SPLIT_TOLERANCE * 100.0,
            sizes,
            dev * 100.0
        ))),
        None => Err(EvalError::Split(format!("{n} prompts cannot be split into three parts"))),
    }
}

/// `n_trials` independent prompt-level partitions. Trial `t` shuffles the
/// sorted prompt ids with a stream derived from `(seed, t)`.
pub fn make_splits(manifest: &DatasetManifest, n_trials: usize, seed: u64) -> Result<Vec<SplitPlan>, EvalError> {
    let mut ids: Vec<String> = manifest.prompts.iter().map(|p| p.prompt_id.clone()).collect();
    ids.sort();
    ids.dedup();
    split_ids(&ids, n_trials, seed)
}

pub fn split_ids(sorted_ids: &[String], n_trials: usize, seed: u64) -> Result<Vec<SplitPlan>, EvalError> {
    if n_trials == 0 {
        return Err(EvalError::Split("n_trials must be positive".into()));
    }
    let [tr, va, _] = split_sizes(sorted_ids.len())?;
    Ok((0..n_trials)
        .map(|trial_id| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(trial_id as u64);
            let mut ids = sorted_ids.to_vec();
            ids.shuffle(&mut rng);
            let mut test = ids.split_off(tr + va);
            let mut val = ids.split_off(tr);
            let mut train = ids;
            train.sort();
            val.sort();
            test.sort();
            SplitPlan { trial_id, train, val, test }
        })
        .collect())
}
