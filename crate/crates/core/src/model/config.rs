use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::dimension::Dimension;

/// Shape of the fusion network and which features enter the unified
/// quality vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionConfig {
    /// Width each modality's tokens are projected to before attention.
    pub model_dim: usize,
    pub scma_heads: usize,
    pub scma_ffn_dim: usize,
    /// Width of every block of the unified feature; always `2 * model_dim`.
    pub fused_dim: usize,
    pub regressor_hidden: usize,
    /// Regressor heads, in output order.
    pub target_dimensions: Vec<Dimension>,
    pub use_spatial: bool,
    pub use_temporal: bool,
    pub use_text: bool,
    pub use_fusion: bool,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self {
            model_dim: 768,
            scma_heads: 4,
            scma_ffn_dim: 1536,
            fused_dim: 1536,
            regressor_hidden: 9216,
            target_dimensions: Dimension::ALL.to_vec(),
            use_spatial: true,
            use_temporal: true,
            use_text: true,
            use_fusion: true,
        }
    }
}

/// Modalities fused by each cross-attention block, in concatenation order.
pub const FUSION_PAIRS: [(Modality, Modality); 3] = [
    (Modality::Spatial, Modality::Text),
    (Modality::Spatial, Modality::Temporal),
    (Modality::Temporal, Modality::Text),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Modality {
    Spatial,
    Temporal,
    Text,
}

impl FusionConfig {
    /// Laptop-sized network for the toy backbones.
    pub fn small() -> Self {
        Self { model_dim: 16, scma_heads: 4, scma_ffn_dim: 32, fused_dim: 32, regressor_hidden: 64, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.model_dim == 0 || self.scma_ffn_dim == 0 || self.regressor_hidden == 0 {
            return bad("model_dim, scma_ffn_dim and regressor_hidden must be positive".into());
        }
        if self.scma_heads == 0 || !self.model_dim.is_multiple_of(self.scma_heads) {
            return bad(format!("scma_heads {} must divide model_dim {}", self.scma_heads, self.model_dim));
        }
        if self.fused_dim != 2 * self.model_dim {
            return bad(format!("fused_dim {} must equal 2 * model_dim = {}", self.fused_dim, 2 * self.model_dim));
        }
        if self.target_dimensions.is_empty() {
            return bad("target_dimensions is empty".into());
        }
        for (i, d) in self.target_dimensions.iter().enumerate() {
            if self.target_dimensions[..i].contains(d) {
                return bad(format!("target dimension {d} listed twice"));
            }
        }
        if !(self.use_spatial || self.use_temporal || self.use_text) {
            return Err(ModelError::NoFeatures);
        }
        Ok(())
    }

    pub fn outputs(&self) -> usize {
        self.target_dimensions.len()
    }

    pub fn uses(&self, m: Modality) -> bool {
        match m {
            Modality::Spatial => self.use_spatial,
            Modality::Temporal => self.use_temporal,
            Modality::Text => self.use_text,
        }
    }

    /// Whether each of [`FUSION_PAIRS`] contributes a block.
    pub fn fused_enabled(&self) -> [bool; 3] {
        FUSION_PAIRS.map(|(a, b)| self.use_fusion && self.uses(a) && self.uses(b))
    }

    /// Number of `fused_dim` blocks in the unified feature.
    pub fn feature_blocks(&self) -> usize {
        let originals = [self.use_spatial, self.use_temporal, self.use_text].iter().filter(|&&b| b).count();
        originals + self.fused_enabled().iter().filter(|&&b| b).count()
    }

    /// Width of the unified feature, i.e. the regressor input.
    pub fn unified_width(&self) -> usize {
        self.feature_blocks() * self.fused_dim
    }

    pub fn with_ablation(mut self, a: Ablation) -> Self {
        let [s, t, x, f] = a.flags();
        self.use_spatial = s;
        self.use_temporal = t;
        self.use_text = x;
        self.use_fusion = f;
        self
    }
}

/// Feature subsets of the ablation study, in table order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ablation {
    Spatial,
    Temporal,
    Text,
    TemporalText,
    SpatialText,
    SpatialTemporal,
    AllNoFusion,
    Full,
}

impl Ablation {
    pub const ALL: [Ablation; 8] = [
        Ablation::Spatial,
        Ablation::Temporal,
        Ablation::Text,
        Ablation::TemporalText,
        Ablation::SpatialText,
        Ablation::SpatialTemporal,
        Ablation::AllNoFusion,
        Ablation::Full,
    ];

    /// `[use_spatial, use_temporal, use_text, use_fusion]`.
    pub fn flags(self) -> [bool; 4] {
        match self {
            Ablation::Spatial => [true, false, false, false],
            Ablation::Temporal => [false, true, false, false],
            Ablation::Text => [false, false, true, false],
            Ablation::TemporalText => [false, true, true, false],
            Ablation::SpatialText => [true, false, true, false],
            Ablation::SpatialTemporal => [true, true, false, false],
            Ablation::AllNoFusion => [true, true, true, false],
            Ablation::Full => [true, true, true, true],
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Ablation::Spatial => "spatial",
            Ablation::Temporal => "temporal",
            Ablation::Text => "text",
            Ablation::TemporalText => "temporal-text",
            Ablation::SpatialText => "spatial-text",
            Ablation::SpatialTemporal => "spatial-temporal",
            Ablation::AllNoFusion => "all-no-fusion",
            Ablation::Full => "full",
        }
    }
}

impl fmt::Display for Ablation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Ablation {
    type Err = ModelError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|a| a.as_str() == s).ok_or_else(|| {
            let names: Vec<_> = Self::ALL.iter().map(|a| a.as_str()).collect();
            ModelError::Config(format!("unknown ablation {s:?}; expected one of {}", names.join(", ")))
        })
    }
}
