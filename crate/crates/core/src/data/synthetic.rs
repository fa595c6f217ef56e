//! Gaussian-blob stimuli annotated by simulated raters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{normalize_points, AnnotatedPlot, Annotation, Point2, PointSet, RaterGroup};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticSpec {
    pub plots: usize,
    /// Inclusive range of blob counts per plot.
    pub cluster_count_range: (usize, usize),
    pub points_per_plot: usize,
    pub noise_fraction: f64,
    pub rater_count: usize,
    /// Probability that a rater keeps the ground-truth label of a point.
    pub rater_fidelity: f64,
    /// Inclusive range of per-blob standard deviations (pre-normalization units).
    pub cluster_spread: (f64, f64),
    pub id_prefix: String,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            plots: 10,
            cluster_count_range: (2, 4),
            points_per_plot: 512,
            noise_fraction: 0.1,
            rater_count: 5,
            rater_fidelity: 0.9,
            cluster_spread: (0.06, 0.12),
            id_prefix: "syn".to_string(),
            seed: 0,
        }
    }
}

impl SyntheticSpec {
    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.cluster_count_range;
        if lo == 0 || lo > hi {
            return Err(Error::Config(format!(
                "invalid cluster count range {:?}",
                self.cluster_count_range
            )));
        }
        if !(0.0..=1.0).contains(&self.rater_fidelity) {
            return Err(Error::Config(format!(
                "rater fidelity must be in [0,1], got {}",
                self.rater_fidelity
            )));
        }
        if !(0.0..=1.0).contains(&self.noise_fraction) {
            return Err(Error::Config(format!(
                "noise fraction must be in [0,1], got {}",
                self.noise_fraction
            )));
        }
        let clustered = self.points_per_plot - self.noise_count().min(self.points_per_plot);
        if self.points_per_plot < hi || clustered < hi {
            return Err(Error::Config(format!(
                "{} points ({} clustered) cannot hold {} clusters",
                self.points_per_plot, clustered, hi
            )));
        }
        let (s_lo, s_hi) = self.cluster_spread;
        if !(s_lo > 0.0 && s_lo <= s_hi) {
            return Err(Error::Config(format!(
                "invalid cluster spread {:?}",
                self.cluster_spread
            )));
        }
        Ok(())
    }

    fn noise_count(&self) -> usize {
        (self.noise_fraction * self.points_per_plot as f64).round() as usize
    }
}

/// A generated plot together with the labels the raters were derived from.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPlot {
    pub plot: AnnotatedPlot,
    pub truth: Vec<u32>,
}

pub fn gen_synthetic(spec: &SyntheticSpec) -> Result<Vec<AnnotatedPlot>> {
    Ok(gen_synthetic_with_truth(spec)?
        .into_iter()
        .map(|s| s.plot)
        .collect())
}

/// Like [`gen_synthetic`] but also returns each plot's ground truth.
pub fn gen_synthetic_with_truth(spec: &SyntheticSpec) -> Result<Vec<SyntheticPlot>> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.plots)
        .map(|i| gen_plot(spec, &format!("{}-{:05}", spec.id_prefix, i), &mut rng))
        .collect()
}

fn gen_plot(spec: &SyntheticSpec, id: &str, rng: &mut ChaCha8Rng) -> Result<SyntheticPlot> {
    let (k_lo, k_hi) = spec.cluster_count_range;
    let k = rng.random_range(k_lo..=k_hi);
    let spreads: Vec<f64> = (0..k)
        .map(|_| rng.random_range(spec.cluster_spread.0..=spec.cluster_spread.1))
        .collect();
    let centers = place_centers(&spreads, rng);

    let noise = spec.noise_count();
    let clustered = spec.points_per_plot - noise;
    let weights: Vec<f64> = (0..k).map(|_| rng.random_range(0.5..1.5)).collect();
    let sizes = apportion(clustered, &weights);

    let mut points = Vec::with_capacity(spec.points_per_plot);
    let mut truth = Vec::with_capacity(spec.points_per_plot);
    for (c, (&size, (&center, &spread))) in sizes.iter().zip(centers.iter().zip(&spreads)).enumerate() {
        let normal = Normal::new(0.0, spread).expect("positive spread");
        for _ in 0..size {
            points.push(Point2::new(
                center.x + normal.sample(rng),
                center.y + normal.sample(rng),
            ));
            truth.push(c as u32 + 1);
        }
    }
    for _ in 0..noise {
        points.push(Point2::new(
            rng.random_range(-1.0..=1.0),
            rng.random_range(-1.0..=1.0),
        ));
        truth.push(crate::NOISE);
    }

    // Shuffle so that file order carries no label information.
    let mut order: Vec<usize> = (0..points.len()).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    let points: Vec<Point2> = order.iter().map(|&i| points[i]).collect();
    let truth: Vec<u32> = order.iter().map(|&i| truth[i]).collect();

    let label_space = k as u32 + 1;
    let annotations = (0..spec.rater_count)
        .map(|r| {
            let labels = truth
                .iter()
                .map(|&t| {
                    if rng.random::<f64>() < spec.rater_fidelity {
                        t
                    } else {
                        rng.random_range(0..label_space)
                    }
                })
                .collect();
            Annotation::new(format!("r{}", r + 1), labels)
        })
        .collect();

    let pointset = normalize_points(&PointSet::new(id, points))?;
    Ok(SyntheticPlot {
        plot: AnnotatedPlot {
            pointset,
            group: RaterGroup::new(annotations),
            split: None,
            source: Some("synthetic".to_string()),
        },
        truth,
    })
}

/// Rejection-samples blob centers far enough apart that blobs stay disjoint.
fn place_centers(spreads: &[f64], rng: &mut ChaCha8Rng) -> Vec<Point2> {
    let mut separation = 3.0;
    loop {
        for _ in 0..2000 {
            let candidate: Vec<Point2> = spreads
                .iter()
                .map(|_| Point2::new(rng.random_range(-0.7..=0.7), rng.random_range(-0.7..=0.7)))
                .collect();
            let ok = (0..spreads.len()).all(|a| {
                (a + 1..spreads.len()).all(|b| {
                    let min = separation * (spreads[a] + spreads[b]);
                    candidate[a].dist2(&candidate[b]) >= min * min
                })
            });
            if ok {
                return candidate;
            }
        }
        separation *= 0.9;
    }
}

/// Splits `total` into parts proportional to `weights`, each at least one.
fn apportion(total: usize, weights: &[f64]) -> Vec<usize> {
    let k = weights.len();
    let spare = total - k;
    let sum: f64 = weights.iter().sum();
    let quotas: Vec<f64> = weights.iter().map(|w| w / sum * spare as f64).collect();
    let mut sizes: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut rest = spare - sizes.iter().sum::<usize>();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| (quotas[b] - quotas[b].floor()).total_cmp(&(quotas[a] - quotas[a].floor())));
    for &i in order.iter().cycle() {
        if rest == 0 {
            break;
        }
        sizes[i] += 1;
        rest -= 1;
    }
    sizes.iter().map(|s| s + 1).collect()
}
