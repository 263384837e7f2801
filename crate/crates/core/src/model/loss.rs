use ndarray::{Array2, ArrayView1};

use super::ModelError;

/// Per-column loss terms of one batch.
#[derive(Debug, Clone, PartialEq)]
pub struct LossBreakdown {
    pub total: f64,
    pub mae: Vec<f64>,
    pub rank: Vec<f64>,
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Pairwise margin hinge: mean over ordered pairs `i != j` of
/// `max(0, |q_i - q_j| - sign(q_i - q_j) * (p_i - p_j))`. Zero for one sample.
pub fn rank_loss(pred: ArrayView1<f64>, target: ArrayView1<f64>) -> f64 {
    let n = pred.len();
    if n < 2 {
        return 0.0;
    }
    let mut sum = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let dq = target[i] - target[j];
                sum += (dq.abs() - sign(dq) * (pred[i] - pred[j])).max(0.0);
            }
        }
    }
    sum / (n * (n - 1)) as f64
}

/// `mean_d (MAE_d + lambda * Rank_d)` over the columns of `B x K`
/// predictions and targets, with its gradient with respect to `pred`.
/// Kinks (zero residual, zero hinge) take subgradient 0.
pub fn quality_loss(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    lambda: f64,
) -> Result<(LossBreakdown, Array2<f64>), ModelError> {
    if pred.dim() != target.dim() || pred.nrows() == 0 || pred.ncols() == 0 {
        return Err(ModelError::Shape(format!("loss on {:?} predictions and {:?} targets", pred.dim(), target.dim())));
    }
    if pred.iter().chain(target.iter()).any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite("loss inputs"));
    }
    let (n, k) = pred.dim();
    let mut grad = Array2::zeros((n, k));
    let mut mae = vec![0.0; k];
    let mut rank = vec![0.0; k];
    let pairs = (n * n.saturating_sub(1)) as f64;
    for d in 0..k {
        let (p, q) = (pred.column(d), target.column(d));
        for i in 0..n {
            let r = p[i] - q[i];
            mae[d] += r.abs() / n as f64;
            grad[[i, d]] += sign(r) / (n as f64 * k as f64);
        }
        rank[d] = rank_loss(p, q);
        if n >= 2 && lambda != 0.0 {
            let w = lambda / (pairs * k as f64);
            for i in 0..n {
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let e = sign(q[i] - q[j]);
                    if (q[i] - q[j]).abs() - e * (p[i] - p[j]) > 0.0 {
                        grad[[i, d]] -= w * e;
                        grad[[j, d]] += w * e;
                    }
                }
            }
        }
    }
    let total = mae.iter().zip(&rank).map(|(m, r)| m + lambda * r).sum::<f64>() / k as f64;
    Ok((LossBreakdown { total, mae, rank }, grad))
}
