use serde::Serialize;

use super::FeatureError;

/// Indices of the frames kept by temporal downsampling:
/// `indices[i] = floor(N / N_s * i)` for `i` in `0..N_s`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct KeyframePlan {
    pub source_count: usize,
    pub target_count: usize,
    pub indices: Vec<usize>,
}

/// Evaluated in exact integer arithmetic as `(N * i) div N_s`, which equals
/// the real-valued floor for every `N`, `N_s`. Repeats appear when
/// `N < N_s`.
pub fn plan_keyframes(source_count: usize, target_count: usize) -> Result<KeyframePlan, FeatureError> {
    if source_count == 0 || target_count == 0 {
        return Err(FeatureError::InvalidConfig(format!(
            "keyframe plan needs positive counts, got N = {source_count}, N_s = {target_count}"
        )));
    }
    let indices = (0..target_count).map(|i| source_count * i / target_count).collect();
    Ok(KeyframePlan { source_count, target_count, indices })
}
