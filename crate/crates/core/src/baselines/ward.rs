use super::kmeans::check_k;
use crate::data::Point2;
use crate::error::Result;

/// Full agglomeration order: each entry `(keep, absorbed)` merges the
/// cluster in slot `absorbed` into slot `keep` (`keep < absorbed`). A slot
/// is named by the lowest point index it has ever held.
///
/// Distances are Ward merge costs on squared Euclidean distances, updated
/// with the Lance–Williams recurrence. Ties go to the lexicographically
/// smallest slot pair.
pub fn ward_merges(points: &[Point2]) -> Vec<(usize, usize)> {
    let n = points.len();
    let mut d = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            d[i * n + j] = points[i].dist2(&points[j]);
        }
    }
    let mut size = vec![1usize; n];
    let mut active = vec![true; n];
    let mut merges = Vec::with_capacity(n.saturating_sub(1));
    for _ in 1..n {
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            if !active[i] {
                continue;
            }
            for j in i + 1..n {
                if active[j] && d[i * n + j] < best.0 {
                    best = (d[i * n + j], i, j);
                }
            }
        }
        let (dij, a, b) = best;
        for k in 0..n {
            if !active[k] || k == a || k == b {
                continue;
            }
            let (na, nb, nk) = (size[a] as f64, size[b] as f64, size[k] as f64);
            let v = ((na + nk) * d[k * n + a] + (nb + nk) * d[k * n + b] - nk * dij) / (na + nb + nk);
            d[k * n + a] = v;
            d[a * n + k] = v;
        }
        size[a] += size[b];
        active[b] = false;
        merges.push((a, b));
    }
    merges
}

/// Cuts a merge sequence at `k` clusters; labels are numbered from 1 in
/// order of first appearance.
pub fn cut_merges(n: usize, merges: &[(usize, usize)], k: usize) -> Vec<u32> {
    let mut parent: Vec<usize> = (0..n).collect();
    for &(a, b) in merges.iter().take(n - k) {
        parent[b] = a;
    }
    let root = |mut i: usize| {
        while parent[i] != i {
            i = parent[i];
        }
        i
    };
    let mut ids = vec![0u32; n];
    let mut next = 0;
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let r = root(i);
        if ids[r] == 0 {
            next += 1;
            ids[r] = next;
        }
        labels.push(ids[r]);
    }
    labels
}

/// Ward agglomerative clustering cut at `k` clusters.
pub fn ward(points: &[Point2], k: usize) -> Result<Vec<u32>> {
    check_k(k, points.len())?;
    Ok(cut_merges(points.len(), &ward_merges(points), k))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(xs: &[f64]) -> Vec<Point2> {
        xs.iter().map(|&x| Point2::new(x, 0.0)).collect()
    }

    #[test]
    fn collinear_pairs() {
        let p = line(&[0.0, 0.1, 1.0, 1.1]);
        assert_eq!(ward(&p, 2).unwrap(), vec![1, 1, 2, 2]);
        assert_eq!(ward(&p, 4).unwrap(), vec![1, 2, 3, 4]);
        assert_eq!(ward(&p, 1).unwrap(), vec![1; 4]);
        assert!(ward(&p, 5).is_err());
    }
}
