use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{FusionConfig, Modality, FUSION_PAIRS};
use super::ModelError;
use crate::features::FeatureBundle;
use crate::nn::{EncoderBlock, Graph, Initializer, Linear, NodeId, ParamStore};

/// Symmetric cross-modality attention. One encoder block, shared by both
/// directions, so `scma(a, b)` and `scma(b, a)` differ only by the order
/// of their halves.
#[derive(Debug, Clone)]
pub struct Scma {
    pub block: EncoderBlock,
}

impl Scma {
    pub fn new(
        store: &mut ParamStore,
        init: &mut Initializer,
        name: &str,
        dim: usize,
        heads: usize,
        ffn: usize,
    ) -> Self {
        Self { block: EncoderBlock::new(store, init, name, dim, heads, ffn) }
    }

    /// `[mean(block(a <- b)), mean(block(b <- a))]`, width `2 * D`.
    pub fn forward(&self, g: &mut Graph, a: NodeId, b: NodeId) -> Result<NodeId, ModelError> {
        let (ta, da) = g.shape(a);
        let (tb, db) = g.shape(b);
        if ta == 0 || tb == 0 || da != db {
            return Err(ModelError::Shape(format!("scma inputs {ta} x {da} and {tb} x {db}")));
        }
        let ab = self.block.forward(g, a, b)?;
        let ab = g.mean_rows(ab);
        let ba = self.block.forward(g, b, a)?;
        let ba = g.mean_rows(ba);
        Ok(g.concat_cols(&[ab, ba])?)
    }
}

/// Token widths produced by the feature backbones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDims {
    pub spatial: usize,
    pub temporal: usize,
    pub text: usize,
}

impl InputDims {
    pub fn of(bundle: &FeatureBundle) -> Self {
        Self { spatial: bundle.spatial.ncols(), temporal: bundle.temporal.ncols(), text: bundle.text.ncols() }
    }

    fn get(&self, m: Modality) -> usize {
        match m {
            Modality::Spatial => self.spatial,
            Modality::Temporal => self.temporal,
            Modality::Text => self.text,
        }
    }
}

const MODALITIES: [Modality; 3] = [Modality::Spatial, Modality::Temporal, Modality::Text];

fn tokens(bundle: &FeatureBundle, m: Modality) -> &Array2<f64> {
    match m {
        Modality::Spatial => &bundle.spatial,
        Modality::Temporal => &bundle.temporal,
        Modality::Text => &bundle.text,
    }
}

/// Projection, fusion and regression. Parameters live in one store so the
/// optimiser and checkpoints see a flat list.
#[derive(Debug, Clone)]
pub struct UgvqModel {
    config: FusionConfig,
    dims: InputDims,
    store: ParamStore,
    project: [Linear; 3],
    lift: [Linear; 3],
    scma: [Scma; 3],
    hidden: Linear,
    output: Linear,
}

impl UgvqModel {
    pub fn new(config: FusionConfig, dims: InputDims, seed: u64) -> Result<Self, ModelError> {
        config.validate()?;
        if dims.spatial == 0 || dims.temporal == 0 || dims.text == 0 {
            return Err(ModelError::Shape(format!("input widths must be positive, got {dims:?}")));
        }
        let mut store = ParamStore::new();
        let mut init = Initializer::new(seed);
        let d = config.model_dim;
        let names = ["spatial", "temporal", "text"];
        let project = [0, 1, 2]
            .map(|i| Linear::new(&mut store, &mut init, &format!("project.{}", names[i]), dims.get(MODALITIES[i]), d));
        let lift =
            [0, 1, 2].map(|i| Linear::new(&mut store, &mut init, &format!("lift.{}", names[i]), d, config.fused_dim));
        let scma = [0, 1, 2].map(|i| {
            Scma::new(&mut store, &mut init, &format!("scma.{}", i + 1), d, config.scma_heads, config.scma_ffn_dim)
        });
        let hidden =
            Linear::new(&mut store, &mut init, "regressor.hidden", config.unified_width(), config.regressor_hidden);
        let output = Linear::new(&mut store, &mut init, "regressor.output", config.regressor_hidden, config.outputs());
        Ok(Self { config, dims, store, project, lift, scma, hidden, output })
    }

    pub fn config(&self) -> &FusionConfig {
        &self.config
    }

    pub fn input_dims(&self) -> InputDims {
        self.dims
    }

    pub fn params(&self) -> &ParamStore {
        &self.store
    }

    pub fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    /// Replaces every parameter; names and shapes must match exactly.
    pub fn load_params(&mut self, store: ParamStore) -> Result<(), ModelError> {
        let same = store.len() == self.store.len()
            && self
                .store
                .ids()
                .all(|id| store.name(id) == self.store.name(id) && store.get(id).dim() == self.store.get(id).dim());
        if !same {
            return Err(ModelError::Shape("parameter set does not match the model layout".into()));
        }
        self.store = store;
        Ok(())
    }

    pub fn scma_blocks(&self) -> &[Scma; 3] {
        &self.scma
    }

    fn check_bundle(&self, bundle: &FeatureBundle) -> Result<(), ModelError> {
        let got = InputDims::of(bundle);
        if got != self.dims || bundle.spatial.nrows() == 0 || bundle.temporal.nrows() == 0 || bundle.text.nrows() == 0 {
            return Err(ModelError::Shape(format!(
                "bundle shapes {:?} do not match model inputs {:?}",
                bundle.shapes(),
                self.dims
            )));
        }
        Ok(())
    }

    /// Unified quality feature for one bundle, `1 x unified_width`.
    pub fn unified_feature(&self, g: &mut Graph, bundle: &FeatureBundle) -> Result<NodeId, ModelError> {
        self.check_bundle(bundle)?;
        let fused = self.config.fused_enabled();
        let needed = |m: Modality| {
            self.config.uses(m) || FUSION_PAIRS.iter().zip(fused).any(|(&(a, b), on)| on && (a == m || b == m))
        };
        let mut projected = [None; 3];
        for (i, m) in MODALITIES.into_iter().enumerate() {
            if needed(m) {
                let x = g.input(tokens(bundle, m).clone());
                projected[i] = Some(self.project[i].forward(g, x)?);
            }
        }
        let mut blocks = Vec::with_capacity(self.config.feature_blocks());
        for (i, m) in MODALITIES.into_iter().enumerate() {
            if self.config.uses(m) {
                let pooled = g.mean_rows(projected[i].expect("projected"));
                blocks.push(self.lift[i].forward(g, pooled)?);
            }
        }
        let index = |m: Modality| MODALITIES.iter().position(|&x| x == m).expect("modality");
        for (k, &(a, b)) in FUSION_PAIRS.iter().enumerate() {
            if fused[k] {
                let pa = projected[index(a)].expect("projected");
                let pb = projected[index(b)].expect("projected");
                blocks.push(self.scma[k].forward(g, pa, pb)?);
            }
        }
        Ok(if blocks.len() == 1 { blocks[0] } else { g.concat_cols(&blocks)? })
    }

    /// Applies the regressor to a `B x unified_width` node.
    pub fn regress(&self, g: &mut Graph, features: NodeId) -> Result<NodeId, ModelError> {
        let (_, w) = g.shape(features);
        if w != self.hidden.in_dim {
            return Err(ModelError::Shape(format!("regressor expects width {}, got {w}", self.hidden.in_dim)));
        }
        let h = self.hidden.forward(g, features)?;
        let h = g.gelu(h);
        Ok(self.output.forward(g, h)?)
    }

    /// `B x outputs` prediction node for a batch.
    pub fn forward(&self, g: &mut Graph, batch: &[&FeatureBundle]) -> Result<NodeId, ModelError> {
        if batch.is_empty() {
            return Err(ModelError::Shape("empty batch".into()));
        }
        let rows = batch.iter().map(|b| self.unified_feature(g, b)).collect::<Result<Vec<_>, _>>()?;
        let features = if rows.len() == 1 { rows[0] } else { g.concat_rows(&rows)? };
        self.regress(g, features)
    }

    /// Predictions for a batch, one row per bundle, columns in
    /// `target_dimensions` order. Pure on immutable parameters.
    pub fn predict(&self, batch: &[&FeatureBundle]) -> Result<Array2<f64>, ModelError> {
        let mut g = Graph::new(&self.store);
        let out = self.forward(&mut g, batch)?;
        Ok(g.value(out).clone())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dimension::Dimension;

    fn tiny() -> FusionConfig {
        FusionConfig {
            model_dim: 8,
            scma_heads: 2,
            scma_ffn_dim: 8,
            fused_dim: 16,
            regressor_hidden: 8,
            ..FusionConfig::default()
        }
    }

    pub(crate) fn bundle(seed: u64) -> FeatureBundle {
        let f = |r, c, k: f64| {
            Array2::from_shape_fn((r, c), |(i, j)| ((seed as f64 + 1.0) * k * (i * 7 + j * 3 + 1) as f64).sin())
        };
        FeatureBundle { spatial: f(4, 5, 0.37), temporal: f(2, 3, 0.91), text: f(1, 6, 1.3) }
    }

    fn dims() -> InputDims {
        InputDims::of(&bundle(0))
    }

    #[test]
    fn scma_half_swap_is_exact() {
        let model = UgvqModel::new(tiny(), dims(), 3).unwrap();
        let mut g = Graph::new(model.params());
        let a = g.input(Array2::from_shape_fn((3, 8), |(i, j)| (i as f64 - j as f64 * 0.3).cos()));
        let b = g.input(Array2::from_shape_fn((5, 8), |(i, j)| (i as f64 * 0.7 + j as f64).sin()));
        let ab = model.scma[0].forward(&mut g, a, b).unwrap();
        let ba = model.scma[0].forward(&mut g, b, a).unwrap();
        let (ab, ba) = (g.value(ab), g.value(ba));
        assert_eq!(ab.ncols(), 16);
        for j in 0..8 {
            assert_eq!(ab[[0, j]], ba[[0, j + 8]]);
            assert_eq!(ab[[0, j + 8]], ba[[0, j]]);
        }
    }

    #[test]
    fn scma_with_zeroed_output_projections_passes_inputs_through() {
        let mut model = UgvqModel::new(tiny(), dims(), 3).unwrap();
        let blk = model.scma[0].block.clone();
        for id in [blk.attn.output.weight, blk.attn.output.bias, blk.ffn.down.weight, blk.ffn.down.bias] {
            model.params_mut().get_mut(id).fill(0.0);
        }
        let tok_a = Array2::from_shape_fn((1, 8), |(_, j)| j as f64 * 0.1);
        let tok_b = Array2::from_shape_fn((1, 8), |(_, j)| 1.0 - j as f64 * 0.2);
        let mut g = Graph::new(model.params());
        let a = g.input(tok_a.clone());
        let b = g.input(tok_b.clone());
        let out = model.scma[0].forward(&mut g, a, b).unwrap();
        let out = g.value(out);
        for j in 0..8 {
            assert_eq!(out[[0, j]], tok_a[[0, j]]);
            assert_eq!(out[[0, j + 8]], tok_b[[0, j]]);
        }
    }

    #[test]
    fn unified_width_follows_flags() {
        for a in super::super::Ablation::ALL {
            let cfg = tiny().with_ablation(a);
            let model = UgvqModel::new(cfg.clone(), dims(), 1).unwrap();
            let mut g = Graph::new(model.params());
            let f = model.unified_feature(&mut g, &bundle(1)).unwrap();
            assert_eq!(g.shape(f), (1, cfg.unified_width()), "{a}");
        }
    }

    #[test]
    fn fusion_changes_predictions() {
        let with = UgvqModel::new(tiny(), dims(), 1).unwrap();
        let without = UgvqModel::new(tiny().with_ablation(super::super::Ablation::AllNoFusion), dims(), 1).unwrap();
        let b = bundle(2);
        assert_ne!(with.predict(&[&b]).unwrap(), without.predict(&[&b]).unwrap());
    }

    #[test]
    fn zero_parameters_predict_zero() {
        let mut model = UgvqModel::new(tiny(), dims(), 1).unwrap();
        let ids: Vec<_> = model.params().ids().collect();
        for id in ids {
            model.params_mut().get_mut(id).fill(0.0);
        }
        let p = model.predict(&[&bundle(1), &bundle(2)]).unwrap();
        assert_eq!(p.dim(), (2, 3));
        assert!(p.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_count_follows_targets() {
        let cfg = FusionConfig { target_dimensions: vec![Dimension::Alignment, Dimension::Spatial], ..tiny() };
        let model = UgvqModel::new(cfg, dims(), 1).unwrap();
        assert_eq!(model.predict(&[&bundle(0)]).unwrap().dim(), (1, 2));
    }

    #[test]
    fn rejects_mismatched_bundles() {
        let model = UgvqModel::new(tiny(), dims(), 1).unwrap();
        let mut b = bundle(0);
        b.text = Array2::zeros((1, 7));
        assert!(matches!(model.predict(&[&b]), Err(ModelError::Shape(_))));
    }
}
