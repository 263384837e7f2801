//! Central finite differences against the analytic gradient of the
//! training objective.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ugvq::model::{quality_loss, FusionConfig, UgvqModel};
use ugvq::nn::Graph;
use ugvq::FeatureBundle;

pub struct GradCheck {
    pub max_rel_error: f64,
    pub checked: usize,
}

fn tokens(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-1.0..1.0))
}

pub fn random_bundles(seed: u64, batch: usize, dims: (usize, usize, usize)) -> Vec<FeatureBundle> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..batch)
        .map(|i| FeatureBundle {
            spatial: tokens(&mut rng, 3, dims.0),
            temporal: tokens(&mut rng, 2, dims.1),
            text: tokens(&mut rng, 2 + i % 3, dims.2),
        })
        .collect()
}

fn loss(model: &UgvqModel, batch: &[&FeatureBundle], target: &Array2<f64>, lambda: f64) -> f64 {
    quality_loss(&model.predict(batch).unwrap(), target, lambda).unwrap().0.total
}

/// Relative error `|a - n| / max(|a|, |n|, floor)` over every scalar
/// parameter, with step `h`. The floor keeps round-off on vanishing
/// gradients from dominating.
pub fn check(cfg: FusionConfig, seed: u64, batch: usize, h: f64, floor: f64) -> GradCheck {
    let bundles = random_bundles(seed, batch, (6, 5, 7));
    let refs: Vec<&FeatureBundle> = bundles.iter().collect();
    let mut model = UgvqModel::new(cfg, ugvq::model::InputDims::of(&bundles[0]), seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xABCD);
    let outputs = model.config().outputs();
    // Targets far from the predictions and from each other keep every
    // residual and hinge away from its kink.
    let target = Array2::from_shape_fn((batch, outputs), |(i, _)| 20.0 * i as f64 + rng.random_range(5.0..9.0));
    let lambda = 0.7;

    let analytic = {
        let mut g = Graph::new(model.params());
        let out = model.forward(&mut g, &refs).unwrap();
        let (_, grad) = quality_loss(g.value(out), &target, lambda).unwrap();
        g.backward(&[(out, grad)])
    };
    let ids: Vec<_> = model.params().ids().collect();
    let mut worst = 0.0f64;
    let mut checked = 0;
    for id in ids {
        let shape = model.params().get(id).dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let orig = model.params().get(id)[[r, c]];
                model.params_mut().get_mut(id)[[r, c]] = orig + h;
                let up = loss(&model, &refs, &target, lambda);
                model.params_mut().get_mut(id)[[r, c]] = orig - h;
                let down = loss(&model, &refs, &target, lambda);
                model.params_mut().get_mut(id)[[r, c]] = orig;
                let numeric = (up - down) / (2.0 * h);
                let a = analytic.get(id).map_or(0.0, |g| g[[r, c]]);
                let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(floor);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    GradCheck { max_rel_error: worst, checked }
}
