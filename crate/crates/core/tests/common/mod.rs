//! Brute-force reference implementations and shared generators.
//!
//! Everything here is computed straight from the definitions with full N×N
//! matrices and no incremental shortcuts. None of it calls into the library's
//! metric code.

#![allow(dead_code)]

use percluster::data::Point2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn sim(labels: &[u32]) -> Vec<Vec<f64>> {
    labels
        .iter()
        .map(|a| labels.iter().map(|b| if a == b { 1.0 } else { 0.0 }).collect())
        .collect()
}

pub fn gamma(a: &[u32], b: &[u32]) -> Vec<f64> {
    let (sa, sb) = (sim(a), sim(b));
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| 1.0 - (sa[i][j] - sb[i][j]).abs()).sum::<f64>() / n as f64)
        .collect()
}

pub fn big_gamma(group: &[Vec<u32>]) -> Vec<f64> {
    let n = group[0].len();
    let mut acc = vec![0.0; n];
    let mut pairs = 0.0;
    for m in 0..group.len() {
        for k in m + 1..group.len() {
            for (x, g) in acc.iter_mut().zip(gamma(&group[m], &group[k])) {
                *x += g;
            }
            pairs += 1.0;
        }
    }
    acc.iter().map(|x| x / pairs).collect()
}

pub fn agreement(group: &[Vec<u32>]) -> f64 {
    let g = big_gamma(group);
    g.iter().sum::<f64>() / g.len() as f64
}

pub fn chi(pred: &[u32], group: &[Vec<u32>]) -> f64 {
    let base = agreement(group);
    let mut total = 0.0;
    for m in 0..group.len() {
        let mut replaced = group.to_vec();
        replaced[m] = pred.to_vec();
        total += agreement(&replaced) - base;
    }
    total / group.len() as f64
}

/// Kappa on unordered point pairs with categories same (1) and different (0).
pub fn vanbelle(pred: &[u32], group: &[Vec<u32>]) -> f64 {
    let n = pred.len();
    let sr = sim(pred);
    let sg: Vec<Vec<Vec<f64>>> = group.iter().map(|g| sim(g)).collect();
    let (mut items, mut matches, mut r_same, mut g_same, mut g_total) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for i in 0..n {
        for j in i + 1..n {
            items += 1.0;
            r_same += sr[i][j];
            for s in &sg {
                g_total += 1.0;
                g_same += s[i][j];
                if s[i][j] == sr[i][j] {
                    matches += 1.0;
                }
            }
        }
    }
    let pi_t = matches / g_total;
    let pr = [r_same / items, 1.0 - r_same / items];
    let pg = [g_same / g_total, 1.0 - g_same / g_total];
    let pi_e = pr[0] * pg[0] + pr[1] * pg[1];
    let pi_m = pr[0].min(pg[0]) + pr[1].min(pg[1]);
    if (pi_m - pi_e).abs() <= 1e-12 {
        return if pi_t >= 1.0 - 1e-12 { 1.0 } else { 0.0 };
    }
    (pi_t - pi_e) / (pi_m - pi_e)
}

pub fn noise_iou(pred: &[u32], group: &[Vec<u32>]) -> f64 {
    let mut total = 0.0;
    for g in group {
        let inter = pred.iter().zip(g).filter(|(p, r)| **p == 0 && **r == 0).count();
        let union = pred.iter().zip(g).filter(|(p, r)| **p == 0 || **r == 0).count();
        total += if union == 0 { 1.0 } else { inter as f64 / union as f64 };
    }
    total / group.len() as f64
}

/// `−Σ W (S ln Ŝ + (1−S) ln(1−Ŝ))` with `W` built from scratch.
pub fn mcl(labels: &[u32], estimate: &[f64], d: f64) -> f64 {
    let n = labels.len();
    let s = sim(labels);
    let mut total = 0.0;
    for i in 0..n {
        let size = labels.iter().filter(|&&l| l == labels[i]).count() as f64 / n as f64;
        for j in 0..n {
            let w = if s[i][j] == 1.0 { 1.0 / (size * size) } else { d };
            let p = estimate[i * n + j].clamp(1e-7, 1.0 - 1e-7);
            total -= w * (s[i][j] * p.ln() + (1.0 - s[i][j]) * (1.0 - p).ln());
        }
    }
    total
}

/// Plain DBSCAN: neighbourhoods by exhaustive distance checks, clusters by
/// flood fill over core points, border points attached to their nearest core
/// point (ties to the lower cluster ID).
pub fn dbscan(points: &[Point2], eps: f64, min_pts: usize) -> Vec<u32> {
    let n = points.len();
    let nb: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| points[i].dist2(&points[j]) <= eps * eps).collect())
        .collect();
    let core: Vec<bool> = nb.iter().map(|v| v.len() >= min_pts).collect();
    let mut label = vec![0u32; n];
    let mut next = 0;
    for i in 0..n {
        if !core[i] || label[i] != 0 {
            continue;
        }
        next += 1;
        let mut stack = vec![i];
        label[i] = next;
        while let Some(p) = stack.pop() {
            for &q in &nb[p] {
                if core[q] && label[q] == 0 {
                    label[q] = next;
                    stack.push(q);
                }
            }
        }
    }
    let mut out = label.clone();
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        for &q in &nb[i] {
            if core[q] {
                let cand = (points[i].dist2(&points[q]), label[q]);
                if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                    best = Some(cand);
                }
            }
        }
        out[i] = best.map_or(0, |b| b.1);
    }
    out
}

/// True when `a` and `b` induce the same partition.
pub fn same_partition(a: &[u32], b: &[u32]) -> bool {
    a.len() == b.len() && sim(a) == sim(b)
}

pub fn random_labels(rng: &mut ChaCha8Rng, n: usize, max_label: u32) -> Vec<u32> {
    (0..n).map(|_| rng.random_range(0..=max_label)).collect()
}

pub fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point2> {
    (0..n)
        .map(|_| Point2::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn permute<T: Clone>(v: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&i| v[i].clone()).collect()
}

pub fn random_perm(rng: &mut ChaCha8Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}
