//! Farthest point sampling and radius grouping.

use crate::data::Point2;
use crate::error::{Error, Result};

/// Greedy max-min subset of `m` indices starting from `start`.
///
/// Each step picks the point farthest from everything selected so far; ties
/// go to the lowest index. The result lists indices in selection order.
pub fn farthest_point_sampling(points: &[Point2], m: usize, start: usize) -> Result<Vec<usize>> {
    let n = points.len();
    if m == 0 || m > n {
        return Err(Error::Config(format!("cannot sample {m} of {n} points")));
    }
    if start >= n {
        return Err(Error::Config(format!("start index {start} out of {n} points")));
    }
    let mut selected = Vec::with_capacity(m);
    let mut nearest = vec![f64::INFINITY; n];
    let mut taken = vec![false; n];
    let mut current = start;
    for _ in 0..m {
        selected.push(current);
        taken[current] = true;
        let anchor = points[current];
        let mut best = None;
        let mut best_d = f64::NEG_INFINITY;
        for (i, p) in points.iter().enumerate() {
            let d = anchor.dist2(p);
            if d < nearest[i] {
                nearest[i] = d;
            }
            if !taken[i] && nearest[i] > best_d {
                best_d = nearest[i];
                best = Some(i);
            }
        }
        match best {
            Some(b) => current = b,
            None => break,
        }
    }
    Ok(selected)
}

/// For each center, up to `k_max` point indices within `radius`, nearest
/// first. The center itself always leads its group.
pub fn ball_query(points: &[Point2], centers: &[usize], radius: f64, k_max: usize) -> Vec<Vec<usize>> {
    let r2 = radius * radius;
    centers
        .iter()
        .map(|&c| {
            let anchor = points[c];
            let mut near: Vec<(f64, usize)> = points
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != c)
                .filter_map(|(i, p)| {
                    let d = anchor.dist2(p);
                    (d <= r2).then_some((d, i))
                })
                .collect();
            near.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            std::iter::once(c)
                .chain(near.into_iter().map(|(_, i)| i))
                .take(k_max.max(1))
                .collect()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Point2> {
        v.iter().copied().map(Point2::from).collect()
    }

    #[test]
    fn fps_examples() {
        let p = pts(&[(0.0, 0.0), (1.0, 0.0), (0.1, 0.0)]);
        assert_eq!(farthest_point_sampling(&p, 2, 0).unwrap(), vec![0, 1]);
        assert_eq!(farthest_point_sampling(&p, 3, 0).unwrap(), vec![0, 1, 2]);
        assert_eq!(farthest_point_sampling(&p, 1, 2).unwrap(), vec![2]);
        assert!(farthest_point_sampling(&p, 4, 0).is_err());
    }

    #[test]
    fn ball_query_examples() {
        let p = pts(&[(0.0, 0.0), (0.1, 0.0), (1.0, 0.0)]);
        assert_eq!(ball_query(&p, &[0], 0.15, 32), vec![vec![0, 1]]);
        assert_eq!(ball_query(&p, &[2], 0.15, 32), vec![vec![2]]);
        assert_eq!(ball_query(&p, &[1], 5.0, 32), vec![vec![1, 0, 2]]);
        assert_eq!(ball_query(&p, &[1], 5.0, 2), vec![vec![1, 0]]);
    }
}
