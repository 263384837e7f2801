mod support;

use ndarray::{array, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ugvq::model::{quality_loss, rank_loss, Ablation, FusionConfig, InputDims, UgvqModel};
use ugvq::nn::Graph;
use ugvq::FeatureBundle;

fn tiny(model_dim: usize) -> FusionConfig {
    FusionConfig {
        model_dim,
        scma_heads: 2,
        scma_ffn_dim: 2 * model_dim,
        fused_dim: 2 * model_dim,
        regressor_hidden: 4 * model_dim,
        ..FusionConfig::default()
    }
}

#[test]
fn ablation_widths() {
    let widths: Vec<usize> =
        Ablation::ALL.iter().map(|&a| FusionConfig::default().with_ablation(a).unified_width()).collect();
    assert_eq!(widths, [1536, 1536, 1536, 3072, 3072, 3072, 4608, 9216]);
    let full = FusionConfig::default();
    assert_eq!(full.regressor_hidden, 9216);
    assert_eq!(full.unified_width(), 9216);
}

#[test]
fn built_regressor_input_matches_width_arithmetic() {
    let bundles = support::gradcheck::random_bundles(1, 1, (6, 5, 7));
    for a in Ablation::ALL {
        let cfg = tiny(8).with_ablation(a);
        let model = UgvqModel::new(cfg.clone(), InputDims::of(&bundles[0]), 0).unwrap();
        let mut g = Graph::new(model.params());
        let f = model.unified_feature(&mut g, &bundles[0]).unwrap();
        assert_eq!(g.shape(f), (1, cfg.unified_width()), "{a}");
    }
}

#[test]
fn scma_is_symmetric_under_half_swap() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let dims = (6, 5, 7);
    let bundles = support::gradcheck::random_bundles(0, 1, dims);
    let model = UgvqModel::new(tiny(8), InputDims::of(&bundles[0]), 11).unwrap();
    for _ in 0..100 {
        let (ta, tb) = (rng.random_range(1..9), rng.random_range(1..9));
        let a = Array2::from_shape_fn((ta, 8), |_| rng.random_range(-3.0..3.0));
        let b = Array2::from_shape_fn((tb, 8), |_| rng.random_range(-3.0..3.0));
        for scma in model.scma_blocks() {
            let mut g = Graph::new(model.params());
            let (na, nb) = (g.input(a.clone()), g.input(b.clone()));
            let ab = scma.forward(&mut g, na, nb).unwrap();
            let ba = scma.forward(&mut g, nb, na).unwrap();
            let (ab, ba) = (g.value(ab).row(0).to_vec(), g.value(ba).row(0).to_vec());
            let swapped: Vec<f64> = ba[8..].iter().chain(&ba[..8]).copied().collect();
            assert_eq!(ab, swapped);
        }
    }
}

#[test]
fn analytic_gradient_matches_finite_differences() {
    let started = std::time::Instant::now();
    let r = support::gradcheck::check(tiny(8), 5, 4, 1e-4, 1e-6);
    assert!(r.checked > 1000);
    assert!(r.max_rel_error < 1e-4, "max relative error {:e}", r.max_rel_error);
    assert!(started.elapsed().as_secs() < 60);
}

#[test]
fn gradient_holds_for_partial_feature_sets() {
    for a in [Ablation::Spatial, Ablation::TemporalText, Ablation::AllNoFusion] {
        let r = support::gradcheck::check(tiny(4).with_ablation(a), 2, 3, 1e-4, 1e-6);
        assert!(r.max_rel_error < 1e-4, "{a}: {:e}", r.max_rel_error);
    }
}

#[test]
fn predictions_follow_batch_order() {
    let bundles = support::gradcheck::random_bundles(9, 5, (6, 5, 7));
    let model = UgvqModel::new(tiny(8), InputDims::of(&bundles[0]), 4).unwrap();
    let fwd: Vec<&FeatureBundle> = bundles.iter().collect();
    let rev: Vec<&FeatureBundle> = bundles.iter().rev().collect();
    let p = model.predict(&fwd).unwrap();
    let q = model.predict(&rev).unwrap();
    for (i, b) in fwd.iter().enumerate() {
        assert_eq!(p.row(i), q.row(4 - i));
        assert_eq!(p.row(i), model.predict(&[*b]).unwrap().row(0));
    }
}

#[test]
fn loss_worked_example() {
    // MAE = 10 per column. Pair (0, 1): target gap 20, predicted gap 0, so
    // both ordered pairs cost 20; rank = 20. Total = 10 + 20.
    let pred = array![[50.0], [50.0]];
    let target = array![[40.0], [60.0]];
    let (l, _) = quality_loss(&pred, &target, 1.0).unwrap();
    assert_eq!(l.total, 30.0);
}

proptest! {
    #[test]
    fn loss_is_zero_only_on_exact_fit(v in proptest::collection::vec(0.0..100.0f64, 2..12)) {
        let t = Array2::from_shape_vec((v.len(), 1), v.clone()).unwrap();
        let (l, g) = quality_loss(&t, &t, 1.0).unwrap();
        prop_assert_eq!(l.total, 0.0);
        prop_assert!(g.iter().all(|&x| x == 0.0));
        let shifted = t.mapv(|x| x + 1.0);
        prop_assert!(quality_loss(&shifted, &t, 1.0).unwrap().0.total > 0.0);
    }

    #[test]
    fn rank_loss_ignores_common_shift(
        v in proptest::collection::vec(0.0..100.0f64, 2..12),
        p in proptest::collection::vec(0.0..100.0f64, 12),
        c in -50.0..50.0f64,
    ) {
        let n = v.len();
        let t = ndarray::Array1::from(v);
        let pred = ndarray::Array1::from(p[..n].to_vec());
        let a = rank_loss(pred.view(), t.view());
        let b = rank_loss(pred.mapv(|x| x + c).view(), t.view());
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() < 1e-9);
    }
}
