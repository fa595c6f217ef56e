use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Point2;
use crate::error::{Error, Result};

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Config(format!("k must lie in 1..={n}, got {k}")));
    }
    Ok(())
}

/// k-means++ seeding: the first center uniformly, each further one with
/// probability proportional to squared distance from the nearest chosen
/// center. When every remaining distance is zero the lowest unused index
/// is taken.
pub(crate) fn kmeans_pp<R: Rng>(points: &[Point2], k: usize, rng: &mut R) -> Vec<Point2> {
    let n = points.len();
    let first = rng.random_range(0..n);
    let mut chosen = vec![first];
    let mut d2: Vec<f64> = points.iter().map(|p| p.dist2(&points[first])).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 {
                    pick = Some(i);
                    if target < d {
                        break;
                    }
                    target -= d;
                }
            }
            pick.expect("positive total implies a positive entry")
        } else {
            (0..n).find(|i| !chosen.contains(i)).expect("k ≤ n")
        };
        chosen.push(pick);
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(p.dist2(&points[pick]));
        }
    }
    chosen.into_iter().map(|i| points[i]).collect()
}

pub(crate) fn nearest(p: &Point2, centers: &[Point2]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, q) in centers.iter().enumerate() {
        let d = p.dist2(q);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

/// Result of a k-means run with its objective trace.
#[derive(Debug, Clone, PartialEq)]
pub struct KmeansFit {
    /// Cluster labels 1..=k.
    pub labels: Vec<u32>,
    pub centers: Vec<Point2>,
    /// Within-cluster sum of squares after each update of the centers.
    pub wcss: Vec<f64>,
    pub iterations: usize,
}

pub const KMEANS_MAX_ITER: usize = 300;

fn wcss(points: &[Point2], assign: &[usize], centers: &[Point2]) -> f64 {
    points.iter().zip(assign).map(|(p, &a)| p.dist2(&centers[a])).sum()
}

/// Lloyd iterations from k-means++ seeds until assignments stop changing.
/// An emptied cluster is re-seeded at the point farthest from its center.
pub fn kmeans_fit(points: &[Point2], k: usize, seed: u64) -> Result<KmeansFit> {
    let n = points.len();
    check_k(k, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = kmeans_pp(points, k, &mut rng);
    let mut assign: Vec<usize> = points.iter().map(|p| nearest(p, &centers).0).collect();
    let mut trace = Vec::new();
    let mut iterations = 0;
    while iterations < KMEANS_MAX_ITER {
        iterations += 1;
        // Repair empty clusters by stealing the worst-fit point.
        let mut sizes = vec![0usize; k];
        for &a in &assign {
            sizes[a] += 1;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| sizes[assign[i]] > 1)
                .max_by(|&a, &b| {
                    let da = points[a].dist2(&centers[assign[a]]);
                    let db = points[b].dist2(&centers[assign[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                });
            if let Some(i) = far {
                sizes[assign[i]] -= 1;
                assign[i] = c;
                sizes[c] = 1;
            }
        }
        let mut sum = vec![(0.0, 0.0); k];
        for (p, &a) in points.iter().zip(&assign) {
            sum[a].0 += p.x;
            sum[a].1 += p.y;
        }
        for c in 0..k {
            if sizes[c] > 0 {
                centers[c] = Point2::new(sum[c].0 / sizes[c] as f64, sum[c].1 / sizes[c] as f64);
            }
        }
        trace.push(wcss(points, &assign, &centers));
        let next: Vec<usize> = points
            .iter()
            .zip(&assign)
            .map(|(p, &a)| {
                // Keep the current center unless another is strictly closer.
                let (c, d) = nearest(p, &centers);
                if d < p.dist2(&centers[a]) {
                    c
                } else {
                    a
                }
            })
            .collect();
        if next == assign {
            break;
        }
        assign = next;
    }
    Ok(KmeansFit {
        labels: assign.iter().map(|&a| a as u32 + 1).collect(),
        centers,
        wcss: trace,
        iterations,
    })
}

pub fn kmeans(points: &[Point2], k: usize, seed: u64) -> Result<Vec<u32>> {
    Ok(kmeans_fit(points, k, seed)?.labels)
}
