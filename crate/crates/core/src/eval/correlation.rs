//! Rank and linear correlation coefficients. Undefined values (constant
//! inputs) are errors, never zeros.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CorrelationError {
    #[error("vectors have different lengths ({0} and {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 points, got {0}")]
    TooShort(usize),
    #[error("correlation undefined for a constant vector")]
    Degenerate,
    #[error("non-finite input")]
    NonFinite,
}

fn check(x: &[f64], y: &[f64]) -> Result<(), CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrelationError::TooShort(x.len()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(CorrelationError::NonFinite);
    }
    Ok(())
}

/// Pearson's r.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check(x, y)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(CorrelationError::Degenerate);
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman's rho: Pearson on average ranks.
pub fn srcc(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check(x, y)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Sum of `t (t - 1) / 2` over runs of equal adjacent values.
fn tie_pairs<T: PartialEq>(sorted: impl Iterator<Item = T>) -> u64 {
    let mut total = 0u64;
    let mut run = 0u64;
    let mut prev: Option<T> = None;
    for v in sorted {
        if prev.as_ref() == Some(&v) {
            run += 1;
        } else {
            total += run * (run + 1) / 2;
            run = 0;
        }
        prev = Some(v);
    }
    total + run * (run + 1) / 2
}

/// Merge sort that returns the number of inversions.
fn sort_counting_swaps(v: &mut [f64], buf: &mut [f64]) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps =
        sort_counting_swaps(&mut v[..mid], &mut buf[..mid]) + sort_counting_swaps(&mut v[mid..], &mut buf[mid..]);
    let (mut i, mut j, mut k) = (0, mid, 0);
    while i < mid && j < n {
        if v[j] < v[i] {
            buf[k] = v[j];
            swaps += (mid - i) as u64;
            j += 1;
        } else {
            buf[k] = v[i];
            i += 1;
        }
        k += 1;
    }
    buf[k..k + mid - i].copy_from_slice(&v[i..mid]);
    k += mid - i;
    buf[k..k + n - j].copy_from_slice(&v[j..n]);
    v.copy_from_slice(&buf[..n]);
    swaps
}

/// Kendall's tau-b, computed in `O(n log n)` with Knight's algorithm:
/// `(n0 - n1 - n2 + n3 - 2 * swaps) / sqrt((n0 - n1) (n0 - n2))`.
pub fn krcc(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    check(x, y)?;
    let n = x.len();
    let mut pairs: Vec<(f64, f64)> = x.iter().copied().zip(y.iter().copied()).collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let n0 = (n * (n - 1) / 2) as u64;
    let n1 = tie_pairs(pairs.iter().map(|p| p.0));
    let n3 = tie_pairs(pairs.iter().copied());
    let mut ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let mut buf = vec![0.0; n];
    let swaps = sort_counting_swaps(&mut ys, &mut buf);
    let n2 = tie_pairs(ys.iter().copied());
    if n0 == n1 || n0 == n2 {
        return Err(CorrelationError::Degenerate);
    }
    let num = n0 as i64 - n1 as i64 - n2 as i64 + n3 as i64 - 2 * swaps as i64;
    Ok((num as f64 / ((n0 - n1) as f64 * (n0 - n2) as f64).sqrt()).clamp(-1.0, 1.0))
}

/// How PLCC treated the predictions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlccMapping {
    Raw,
    Logistic,
}

/// Four-parameter logistic `b2 + (b1 - b2) / (1 + exp(-(x - b3) / |b4|))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic4(pub [f64; 4]);

impl Logistic4 {
    pub fn eval(&self, x: f64) -> f64 {
        let [b1, b2, b3, b4] = self.0;
        b2 + (b1 - b2) / (1.0 + (-(x - b3) / b4.abs()).exp())
    }

    fn grad(&self, x: f64) -> [f64; 4] {
        let [b1, b2, b3, b4] = self.0;
        let s = b4.abs();
        let e = (-(x - b3) / s).exp();
        let sig = 1.0 / (1.0 + e);
        let dsig = sig * (1.0 - sig);
        let d3 = (b1 - b2) * dsig * (-1.0 / s);
        let d4 = (b1 - b2) * dsig * (-(x - b3) / (s * s)) * b4.signum();
        [sig, 1.0 - sig, d3, d4]
    }
}

#[allow(clippy::needless_range_loop)]
fn solve4(mut a: [[f64; 4]; 4], mut b: [f64; 4]) -> Option<[f64; 4]> {
    for c in 0..4 {
        let p = (c..4).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        if a[p][c].abs() < 1e-300 {
            return None;
        }
        a.swap(c, p);
        b.swap(c, p);
        for r in c + 1..4 {
            let f = a[r][c] / a[c][c];
            for k in c..4 {
                a[r][k] -= f * a[c][k];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = [0.0; 4];
    for r in (0..4).rev() {
        let s: f64 = (r + 1..4).map(|k| a[r][k] * x[k]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

/// Least-squares fit of `y ~ logistic(x)` by Levenberg-Marquardt. `None`
/// when the fit does not converge.
pub fn fit_logistic(x: &[f64], y: &[f64]) -> Option<Logistic4> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let sx = (x.iter().map(|v| (v - mx).powi(2)).sum::<f64>() / n).sqrt();
    if sx == 0.0 {
        return None;
    }
    let (ymin, ymax) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let rising = pearson(x, y).map(|r| r >= 0.0).unwrap_or(true);
    let (b1, b2) = if rising { (ymax, ymin) } else { (ymin, ymax) };
    let mut f = Logistic4([b1, b2, mx, sx]);
    let sse = |f: &Logistic4| x.iter().zip(y).map(|(&a, &b)| (b - f.eval(a)).powi(2)).sum::<f64>();
    let mut cost = sse(&f);
    let mut mu = 1e-3;
    for _ in 0..500 {
        let mut jtj = [[0.0; 4]; 4];
        let mut jtr = [0.0; 4];
        for (&a, &b) in x.iter().zip(y) {
            let g = f.grad(a);
            let r = b - f.eval(a);
            for i in 0..4 {
                jtr[i] += g[i] * r;
                for j in 0..4 {
                    jtj[i][j] += g[i] * g[j];
                }
            }
        }
        let mut improved = false;
        for _ in 0..30 {
            let mut damped = jtj;
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += mu * jtj[i][i].max(1e-12);
            }
            let Some(step) = solve4(damped, jtr) else {
                mu *= 10.0;
                continue;
            };
            let cand = Logistic4([f.0[0] + step[0], f.0[1] + step[1], f.0[2] + step[2], f.0[3] + step[3]]);
            let c = sse(&cand);
            if c.is_finite() && c <= cost {
                let rel = (cost - c) / cost.max(1e-300);
                f = cand;
                cost = c;
                mu = (mu / 10.0).max(1e-12);
                improved = true;
                if rel < 1e-12 || cost < 1e-24 {
                    return (f.0[3] != 0.0).then_some(f);
                }
                break;
            }
            mu *= 10.0;
        }
        if !improved {
            // No damping level reduces the cost: a stationary point.
            return (f.0[3] != 0.0 && cost.is_finite()).then_some(f);
        }
    }
    None
}

/// Pearson on raw predictions, or on predictions mapped through a fitted
/// logistic. A failed fit falls back to raw values with a warning.
pub fn plcc(x: &[f64], y: &[f64], logistic: bool) -> Result<(f64, PlccMapping), CorrelationError> {
    let raw = pearson(x, y)?;
    if !logistic {
        return Ok((raw, PlccMapping::Raw));
    }
    match fit_logistic(x, y) {
        Some(f) => {
            let mapped: Vec<f64> = x.iter().map(|&v| f.eval(v)).collect();
            match pearson(&mapped, y) {
                Ok(r) => Ok((r, PlccMapping::Logistic)),
                Err(_) => {
                    log::warn!("logistic mapping collapsed the predictions; using raw PLCC");
                    Ok((raw, PlccMapping::Raw))
                }
            }
        }
        None => {
            log::warn!("logistic fit did not converge; using raw PLCC");
            Ok((raw, PlccMapping::Raw))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_cases() {
        assert_eq!(srcc(&[1.0, 2.0, 3.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap(), 1.0);
        assert_eq!(srcc(&[1.0, 2.0, 3.0, 4.0], &[4.0, 3.0, 2.0, 1.0]).unwrap(), -1.0);
        // One discordant pair of three: (2 - 1) / 3.
        assert!((krcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        let x = [0.5, 1.5, -2.0, 7.0];
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v + 3.0).collect();
        assert!((plcc(&x, &y, false).unwrap().0 - 1.0).abs() < 1e-15);
        let z: Vec<f64> = x.iter().map(|v| -0.5 * v + 1.0).collect();
        assert!((plcc(&x, &z, false).unwrap().0 + 1.0).abs() < 1e-15);
    }

    #[test]
    fn average_ranks_split_ties() {
        assert_eq!(average_ranks(&[10.0, 20.0, 10.0, 30.0]), vec![1.5, 3.0, 1.5, 4.0]);
    }

    #[test]
    fn degenerate_inputs_are_flagged() {
        let c = [2.0; 5];
        let v = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(srcc(&c, &v), Err(CorrelationError::Degenerate));
        assert_eq!(krcc(&v, &c), Err(CorrelationError::Degenerate));
        assert_eq!(plcc(&c, &v, true), Err(CorrelationError::Degenerate));
        assert_eq!(srcc(&[1.0], &[1.0]), Err(CorrelationError::TooShort(1)));
        assert_eq!(srcc(&[1.0, 2.0], &[1.0]), Err(CorrelationError::LengthMismatch(2, 1)));
    }

    #[test]
    fn logistic_recovers_sigmoid_data() {
        let truth = Logistic4([90.0, 10.0, 0.5, 0.15]);
        let x: Vec<f64> = (0..40).map(|i| i as f64 / 39.0).collect();
        let y: Vec<f64> = x.iter().map(|&v| truth.eval(v)).collect();
        let fit = fit_logistic(&x, &y).expect("converges");
        for &v in &x {
            assert!((fit.eval(v) - truth.eval(v)).abs() < 1e-4);
        }
        let (r, mapping) = plcc(&x, &y, true).unwrap();
        assert_eq!(mapping, PlccMapping::Logistic);
        assert!(r > 0.999_999);
        assert!(plcc(&x, &y, false).unwrap().0 < r);
    }
}
