use std::collections::HashMap;

use crate::data::Point2;
use crate::error::{Error, Result};
use crate::NOISE;

/// Uniform grid with cells a hair wider than `eps`, so rounding can never
/// push a neighbour within `eps` outside the 3×3 block around a point.
struct Grid {
    eps: f64,
    side: f64,
    cells: HashMap<(i64, i64), Vec<usize>>,
}

impl Grid {
    fn new(points: &[Point2], eps: f64) -> Self {
        let side = eps * (1.0 + 1e-9);
        let mut cells: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            cells.entry(Self::cell(p, side)).or_default().push(i);
        }
        Self { eps, side, cells }
    }

    fn cell(p: &Point2, side: f64) -> (i64, i64) {
        ((p.x / side).floor() as i64, (p.y / side).floor() as i64)
    }

    /// Indices within `eps` of point `i` (itself included), ascending.
    fn neighbors(&self, points: &[Point2], i: usize) -> Vec<usize> {
        let p = &points[i];
        let (cx, cy) = Self::cell(p, self.side);
        let r2 = self.eps * self.eps;
        let mut out = Vec::new();
        for dx in -1..=1 {
            for dy in -1..=1 {
                if let Some(members) = self.cells.get(&(cx + dx, cy + dy)) {
                    out.extend(members.iter().copied().filter(|&j| p.dist2(&points[j]) <= r2));
                }
            }
        }
        out.sort_unstable();
        out
    }
}

/// Density-based clustering.
///
/// A point is core when at least `min_pts` points (itself included) lie
/// within `eps`. Core points within `eps` of each other share a cluster;
/// clusters are numbered from 1 in order of their lowest-index core point.
/// A non-core point joins the cluster of its nearest core neighbour (lowest
/// cluster ID on exact ties) and is noise when it has none.
pub fn dbscan(points: &[Point2], eps: f64, min_pts: usize) -> Result<Vec<u32>> {
    if !(eps > 0.0 && eps.is_finite()) {
        return Err(Error::Config(format!("eps must be positive, got {eps}")));
    }
    if min_pts == 0 {
        return Err(Error::Config("min_pts must be at least 1".into()));
    }
    let n = points.len();
    let grid = Grid::new(points, eps);
    let neighbors: Vec<Vec<usize>> = (0..n).map(|i| grid.neighbors(points, i)).collect();
    let core: Vec<bool> = neighbors.iter().map(|nb| nb.len() >= min_pts).collect();

    let mut labels = vec![NOISE; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for seed in 0..n {
        if !core[seed] || labels[seed] != NOISE {
            continue;
        }
        next += 1;
        labels[seed] = next;
        stack.push(seed);
        while let Some(i) = stack.pop() {
            for &j in &neighbors[i] {
                if core[j] && labels[j] == NOISE {
                    labels[j] = next;
                    stack.push(j);
                }
            }
        }
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let mut best: Option<(f64, u32)> = None;
        for &j in &neighbors[i] {
            if !core[j] {
                continue;
            }
            let cand = (points[i].dist2(&points[j]), labels[j]);
            if best.is_none_or(|b| cand.0 < b.0 || (cand.0 == b.0 && cand.1 < b.1)) {
                best = Some(cand);
            }
        }
        if let Some((_, l)) = best {
            labels[i] = l;
        }
    }
    Ok(labels)
}
