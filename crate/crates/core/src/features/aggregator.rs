use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::nn::{EncoderBlock, Graph, Initializer, ParamId, ParamStore};

/// Self-attention encoder over the per-keyframe embeddings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AggregatorConfig {
    pub layers: usize,
    pub heads: usize,
    pub ffn_dim: usize,
    /// Learned positional embeddings, one row per keyframe slot. Only
    /// applied when `layers > 0`.
    pub positional: bool,
    pub seed: u64,
    /// Recorded for provenance; the aggregator is always frozen.
    pub trainable: bool,
}

impl Default for AggregatorConfig {
    fn default() -> Self {
        Self { layers: 8, heads: 2, ffn_dim: 2048, positional: true, seed: 0, trainable: false }
    }
}

impl AggregatorConfig {
    pub fn identity() -> Self {
        Self { layers: 0, ..Self::default() }
    }
}

/// Frozen, seeded transformer encoder. Zero layers is the identity map.
pub struct FrameAggregator {
    config: AggregatorConfig,
    dim: usize,
    positions: usize,
    store: ParamStore,
    position: Option<ParamId>,
    blocks: Vec<EncoderBlock>,
}

impl FrameAggregator {
    pub fn new(config: AggregatorConfig, dim: usize, positions: usize) -> Result<Self, FeatureError> {
        if config.layers > 0 && (config.heads == 0 || !dim.is_multiple_of(config.heads) || config.ffn_dim == 0) {
            return Err(FeatureError::DimensionMismatch(format!(
                "aggregator with {} heads and ffn width {} cannot run on width {dim}",
                config.heads, config.ffn_dim
            )));
        }
        let mut store = ParamStore::new();
        let mut init = Initializer::new(config.seed);
        let position = (config.layers > 0 && config.positional)
            .then(|| store.add("aggregator.position", init.uniform(positions, dim, 0.02)));
        let blocks = (0..config.layers)
            .map(|l| {
                EncoderBlock::new(&mut store, &mut init, &format!("aggregator.{l}"), dim, config.heads, config.ffn_dim)
            })
            .collect();
        Ok(Self { config, dim, positions, store, position, blocks })
    }

    pub fn config(&self) -> &AggregatorConfig {
        &self.config
    }

    pub fn digest(&self) -> String {
        format!(
            "{}:{}:{}:{}:{}",
            self.config.layers,
            self.config.heads,
            self.config.ffn_dim,
            self.config.positional,
            self.store.digest()
        )
    }

    /// `N_s x D` in, `N_s x D` out.
    pub fn forward(&self, tokens: &Array2<f64>) -> Result<Array2<f64>, FeatureError> {
        if tokens.ncols() != self.dim || tokens.nrows() != self.positions {
            return Err(FeatureError::DimensionMismatch(format!(
                "aggregator expects {} x {}, got {} x {}",
                self.positions,
                self.dim,
                tokens.nrows(),
                tokens.ncols()
            )));
        }
        if self.blocks.is_empty() {
            return Ok(tokens.clone());
        }
        let mut g = Graph::new(&self.store);
        let mut x = g.input(tokens.clone());
        if let Some(p) = self.position {
            let p = g.param(p);
            x = g.add(x, p)?;
        }
        for block in &self.blocks {
            x = block.forward_self(&mut g, x)?;
        }
        Ok(g.value(x).clone())
    }
}
