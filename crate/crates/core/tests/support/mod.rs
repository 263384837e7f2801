//! Naive reference implementations, written without reference to the
//! library code they check. Each favours obviousness over speed.
#![allow(dead_code)]

use std::collections::HashMap;

/// Textbook Pearson with two-pass sums.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..x.len() {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// 1-based average ranks by counting: `#less + (#equal + 1) / 2`.
pub fn ranks(x: &[f64]) -> Vec<f64> {
    x.iter()
        .map(|&v| {
            let less = x.iter().filter(|&&w| w < v).count() as f64;
            let equal = x.iter().filter(|&&w| w == v).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

pub fn srcc(x: &[f64], y: &[f64]) -> Option<f64> {
    pearson(&ranks(x), &ranks(y))
}

/// Kendall tau-b by enumerating all pairs.
pub fn krcc(x: &[f64], y: &[f64]) -> Option<f64> {
    let (mut concordant, mut discordant, mut tie_x, mut tie_y) = (0i64, 0i64, 0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let dx = x[i] - x[j];
            let dy = y[i] - y[j];
            if dx == 0.0 && dy == 0.0 {
                continue;
            } else if dx == 0.0 {
                tie_x += 1;
            } else if dy == 0.0 {
                tie_y += 1;
            } else if (dx > 0.0) == (dy > 0.0) {
                concordant += 1;
            } else {
                discordant += 1;
            }
        }
    }
    let a = concordant + discordant + tie_x;
    let b = concordant + discordant + tie_y;
    if a == 0 || b == 0 {
        return None;
    }
    Some((concordant - discordant) as f64 / ((a as f64) * (b as f64)).sqrt())
}

/// `floor(i * N / N_s)` through floating point.
pub fn keyframes(n: usize, ns: usize) -> Vec<usize> {
    (0..ns).map(|i| (i as f64 * n as f64 / ns as f64).floor() as usize).collect()
}

/// One rating: `(observer, video, dimension, score)`.
pub type Row = (String, String, String, f64);

/// MOS from raw ratings, straight from the definition:
/// 1. per condition, mean and population sigma; normal when kurtosis is in
///    [2, 4]; a rating is an outlier beyond 2 sigma (normal) or sqrt(20)
///    sigma (otherwise);
/// 2. observers with more than 5% outlier ratings are dropped entirely,
///    other outlier ratings are dropped individually;
/// 3. z-score per observer and dimension with population sigma (0 when
///    sigma is 0);
/// 4. mean z per condition, clamped to [-3, 3], mapped to [0, 100].
///
/// Returns `(video, dimension) -> MOS` and the rejected observers.
pub fn mos(rows: &[Row]) -> (HashMap<(String, String), f64>, Vec<String>) {
    let mut cond: HashMap<(String, String), Vec<f64>> = HashMap::new();
    for (_, v, d, s) in rows {
        cond.entry((v.clone(), d.clone())).or_default().push(*s);
    }
    let mut stats = HashMap::new();
    for (k, s) in &cond {
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let m2 = s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m4 = s.iter().map(|v| (v - m).powi(4)).sum::<f64>() / n;
        let normal = m2 == 0.0 || (2.0..=4.0).contains(&(m4 / (m2 * m2)));
        let k_sigma = if normal { 2.0 } else { 20f64.sqrt() };
        stats.insert(k.clone(), (m, m2.sqrt(), k_sigma));
    }
    let is_outlier = |r: &Row| {
        let (m, sd, k) = stats[&(r.1.clone(), r.2.clone())];
        (r.3 - m).abs() > k * sd
    };
    let mut counts: HashMap<String, (usize, usize)> = HashMap::new();
    for r in rows {
        let c = counts.entry(r.0.clone()).or_default();
        c.1 += 1;
        if is_outlier(r) {
            c.0 += 1;
        }
    }
    let mut rejected: Vec<String> =
        counts.iter().filter(|(_, (o, t))| *o as f64 / *t as f64 > 0.05).map(|(k, _)| k.clone()).collect();
    rejected.sort();
    let kept: Vec<&Row> = rows.iter().filter(|r| !rejected.contains(&r.0) && !is_outlier(r)).collect();

    let mut per_obs: HashMap<(String, String), Vec<f64>> = HashMap::new();
    for r in &kept {
        per_obs.entry((r.0.clone(), r.2.clone())).or_default().push(r.3);
    }
    let mut zs: HashMap<(String, String), Vec<f64>> = HashMap::new();
    for r in &kept {
        let s = &per_obs[&(r.0.clone(), r.2.clone())];
        let n = s.len() as f64;
        let m = s.iter().sum::<f64>() / n;
        let sd = (s.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n).sqrt();
        let z = if sd == 0.0 { 0.0 } else { (r.3 - m) / sd };
        zs.entry((r.1.clone(), r.2.clone())).or_default().push(z);
    }
    let out = zs
        .into_iter()
        .map(|(k, z)| {
            let mean = z.iter().sum::<f64>() / z.len() as f64;
            (k, (mean.clamp(-3.0, 3.0) + 3.0) / 6.0 * 100.0)
        })
        .collect();
    (out, rejected)
}

pub mod fixtures;
pub mod gradcheck;
