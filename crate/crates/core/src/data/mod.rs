//! Dataset model: point sets, rater annotations, splits and filtering.

mod io;
mod synthetic;

pub use io::{load_dataset, load_splits, read_dataset, save_dataset, write_splits, PlotRecord};
pub use synthetic::{gen_synthetic, gen_synthetic_with_truth, SyntheticPlot, SyntheticSpec};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn dist2(&self, other: &Point2) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

impl From<(f64, f64)> for Point2 {
    fn from((x, y): (f64, f64)) -> Self {
        Self { x, y }
    }
}

/// An ordered list of 2D positions shown to raters as one scatterplot.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    pub id: String,
    pub points: Vec<Point2>,
}

impl PointSet {
    pub fn new(id: impl Into<String>, points: Vec<Point2>) -> Self {
        Self {
            id: id.into(),
            points,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One rater's clustering of a point set. Label 0 marks noise.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotation {
    pub rater: String,
    pub labels: Vec<u32>,
}

impl Annotation {
    pub fn new(rater: impl Into<String>, labels: Vec<u32>) -> Self {
        Self {
            rater: rater.into(),
            labels,
        }
    }

    /// Number of distinct non-noise labels.
    pub fn cluster_count(&self) -> usize {
        cluster_count(&self.labels)
    }
}

/// All annotations collected for one stimulus.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RaterGroup {
    pub annotations: Vec<Annotation>,
}

impl RaterGroup {
    pub fn new(annotations: Vec<Annotation>) -> Self {
        Self { annotations }
    }

    pub fn len(&self) -> usize {
        self.annotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.annotations.is_empty()
    }

    pub fn label_sets(&self) -> Vec<&[u32]> {
        self.annotations.iter().map(|a| a.labels.as_slice()).collect()
    }

    pub fn cluster_counts(&self) -> Vec<usize> {
        self.annotations.iter().map(Annotation::cluster_count).collect()
    }

    /// True when at least one rater labelled at least one point as noise.
    pub fn has_noise(&self) -> bool {
        self.annotations
            .iter()
            .any(|a| a.labels.contains(&crate::NOISE))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

impl std::str::FromStr for Split {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(Error::Config(format!("unknown split '{other}'"))),
        }
    }
}

/// A stimulus together with its rater group.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnotatedPlot {
    pub pointset: PointSet,
    pub group: RaterGroup,
    /// `None` until a split has been assigned.
    pub split: Option<Split>,
    pub source: Option<String>,
}

impl AnnotatedPlot {
    pub fn id(&self) -> &str {
        &self.pointset.id
    }
}

/// Number of distinct labels greater than zero.
pub fn cluster_count(labels: &[u32]) -> usize {
    let mut seen: Vec<u32> = labels.iter().copied().filter(|&l| l != crate::NOISE).collect();
    seen.sort_unstable();
    seen.dedup();
    seen.len()
}

/// Per-axis min/max normalization to `[-1, 1]`.
///
/// A constant axis maps to 0. Fails on non-finite coordinates or fewer than
/// two points.
pub fn normalize_points(set: &PointSet) -> Result<PointSet> {
    if set.points.len() < 2 {
        return Err(Error::Data(format!(
            "stimulus '{}': need at least 2 points, got {}",
            set.id,
            set.points.len()
        )));
    }
    if let Some(i) = set.points.iter().position(|p| !p.is_finite()) {
        return Err(Error::Data(format!(
            "stimulus '{}': non-finite coordinate at point {i}",
            set.id
        )));
    }
    let xs: Vec<f64> = set.points.iter().map(|p| p.x).collect();
    let ys: Vec<f64> = set.points.iter().map(|p| p.y).collect();
    let xs = normalize_axis(&xs);
    let ys = normalize_axis(&ys);
    Ok(PointSet {
        id: set.id.clone(),
        points: xs.into_iter().zip(ys).map(Point2::from).collect(),
    })
}

pub(crate) fn normalize_axis(values: &[f64]) -> Vec<f64> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    if lo == hi {
        return vec![0.0; values.len()];
    }
    if lo == -1.0 && hi == 1.0 {
        // The affine map is the identity here; skip it so repeated
        // normalization is bit-exact.
        return values.to_vec();
    }
    let span = hi - lo;
    values
        .iter()
        .map(|&v| {
            // Endpoints are pinned so a second pass is an exact no-op.
            if v == lo {
                -1.0
            } else if v == hi {
                1.0
            } else {
                (2.0 * (v - lo) / span - 1.0).clamp(-1.0, 1.0)
            }
        })
        .collect()
}

/// Splits `plots` into (train, val, test) by seeded shuffling.
///
/// Sizes follow largest-remainder rounding of `ratios * len`; ties in the
/// remainder go to the earlier split. Each output keeps input order.
pub fn split_dataset(
    plots: &[AnnotatedPlot],
    ratios: [f64; 3],
    seed: u64,
) -> Result<[Vec<AnnotatedPlot>; 3]> {
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-9 || ratios.iter().any(|r| !(0.0..=1.0).contains(r)) {
        return Err(Error::Config(format!(
            "split ratios must be in [0,1] and sum to 1, got {ratios:?}"
        )));
    }
    let sizes = largest_remainder(plots.len(), ratios);
    let mut order: Vec<usize> = (0..plots.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);

    let mut assignment = vec![Split::Train; plots.len()];
    let splits = [Split::Train, Split::Val, Split::Test];
    let mut cursor = 0;
    for (split, size) in splits.iter().zip(sizes) {
        for &idx in &order[cursor..cursor + size] {
            assignment[idx] = *split;
        }
        cursor += size;
    }

    let mut out: [Vec<AnnotatedPlot>; 3] = Default::default();
    for (plot, split) in plots.iter().zip(assignment) {
        let mut plot = plot.clone();
        plot.split = Some(split);
        let slot = match split {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        };
        out[slot].push(plot);
    }
    Ok(out)
}

fn largest_remainder(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let quotas: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes = [0usize; 3];
    for (s, q) in sizes.iter_mut().zip(&quotas) {
        *s = q.floor() as usize;
    }
    let assigned: usize = sizes.iter().sum();
    let mut by_remainder: Vec<usize> = (0..3).collect();
    // Stable sort keeps earlier splits first on equal remainders.
    by_remainder.sort_by(|&a, &b| {
        let ra = quotas[a] - quotas[a].floor();
        let rb = quotas[b] - quotas[b].floor();
        rb.total_cmp(&ra)
    });
    for &i in by_remainder.iter().take(n.saturating_sub(assigned)) {
        sizes[i] += 1;
    }
    sizes
}

/// Keeps plots whose mean rater agreement is at least `threshold`.
pub fn filter_by_agreement(plots: &[AnnotatedPlot], threshold: f64) -> Result<Vec<AnnotatedPlot>> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(Error::Config(format!(
            "agreement threshold must be in [0,1], got {threshold}"
        )));
    }
    let mut kept = Vec::with_capacity(plots.len());
    for plot in plots {
        let agreement = metrics::mean_agreement(&plot.group.label_sets()).map_err(|e| {
            Error::Data(format!("stimulus '{}': {e}", plot.id()))
        })?;
        if agreement >= threshold {
            kept.push(plot.clone());
        }
    }
    Ok(kept)
}

/// Cluster count the raters agree on.
///
/// Returns the count shared by a strict majority of raters, or the mean count
/// when no such majority exists.
pub fn consensus_cluster_count(group: &RaterGroup) -> f64 {
    consensus_from_counts(&group.cluster_counts())
}

pub fn consensus_from_counts(counts: &[usize]) -> f64 {
    if counts.is_empty() {
        return 0.0;
    }
    let mut sorted = counts.to_vec();
    sorted.sort_unstable();
    let mut run_start = 0;
    for i in 1..=sorted.len() {
        if i == sorted.len() || sorted[i] != sorted[run_start] {
            if 2 * (i - run_start) > sorted.len() {
                return sorted[run_start] as f64;
            }
            run_start = i;
        }
    }
    counts.iter().sum::<usize>() as f64 / counts.len() as f64
}

/// Round half up; used to key strata and oracle cluster counts.
pub fn round_count(count: f64) -> usize {
    (count + 0.5).floor().max(0.0) as usize
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(points: &[(f64, f64)]) -> PointSet {
        PointSet::new("s", points.iter().copied().map(Point2::from).collect())
    }

    fn coords(s: &PointSet) -> Vec<(f64, f64)> {
        s.points.iter().map(|p| (p.x, p.y)).collect()
    }

    #[test]
    fn normalize_examples() {
        let n = normalize_points(&set(&[(0.0, 0.0), (4.0, 2.0)])).unwrap();
        assert_eq!(coords(&n), vec![(-1.0, -1.0), (1.0, 1.0)]);

        let n = normalize_points(&set(&[(-1.0, -1.0), (1.0, 1.0)])).unwrap();
        assert_eq!(coords(&n), vec![(-1.0, -1.0), (1.0, 1.0)]);

        let n = normalize_points(&set(&[(3.0, 0.0), (3.0, 1.0)])).unwrap();
        assert_eq!(coords(&n), vec![(0.0, -1.0), (0.0, 1.0)]);
    }

    #[test]
    fn normalize_rejects_non_finite() {
        let err = normalize_points(&PointSet::new(
            "bad-id",
            vec![Point2::new(0.0, f64::NAN), Point2::new(1.0, 1.0)],
        ))
        .unwrap_err();
        assert!(err.to_string().contains("bad-id"));
        assert!(normalize_points(&set(&[(0.0, 0.0)])).is_err());
    }

    fn plots(n: usize) -> Vec<AnnotatedPlot> {
        (0..n)
            .map(|i| AnnotatedPlot {
                pointset: set(&[(0.0, 0.0), (1.0, 1.0)]),
                group: RaterGroup::new(vec![
                    Annotation::new("a", vec![1, 1]),
                    Annotation::new("b", vec![1, 1]),
                ]),
                split: None,
                source: Some(format!("{i}")),
            })
            .collect()
    }

    #[test]
    fn split_sizes_and_determinism() {
        let ps = plots(10);
        let [tr, va, te] = split_dataset(&ps, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!((tr.len(), va.len(), te.len()), (8, 1, 1));
        let again = split_dataset(&ps, [0.8, 0.1, 0.1], 7).unwrap();
        assert_eq!([tr, va, te], again);
    }

    #[test]
    fn split_reproduces_reference_sizes() {
        let n = 1464.0;
        let sizes = largest_remainder(1464, [1171.0 / n, 87.0 / n, 206.0 / n]);
        assert_eq!(sizes, [1171, 87, 206]);
    }

    #[test]
    fn split_rejects_bad_ratios() {
        assert!(matches!(
            split_dataset(&plots(3), [0.5, 0.2, 0.2], 0),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn filter_examples() {
        let mut ps = plots(1);
        ps[0].group = RaterGroup::new(vec![
            Annotation::new("a", vec![1, 1, 2]),
            Annotation::new("b", vec![1, 1, 1]),
        ]);
        ps.extend(plots(1).into_iter().map(|mut p| {
            p.pointset = set(&[(0.0, 0.0), (1.0, 1.0), (2.0, 0.0)]);
            p.group = RaterGroup::new(vec![
                Annotation::new("a", vec![1, 1, 1]),
                Annotation::new("b", vec![1, 1, 1]),
            ]);
            p
        }));
        assert_eq!(filter_by_agreement(&ps, 0.0).unwrap(), ps);
        assert_eq!(filter_by_agreement(&ps, 0.6).unwrap().len(), 1);
        assert_eq!(filter_by_agreement(&ps, 0.5).unwrap().len(), 2);
        assert_eq!(filter_by_agreement(&ps, 1.0).unwrap().len(), 1);
        assert!(filter_by_agreement(&ps, 1.5).is_err());
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_from_counts(&[2, 2, 2, 3, 4]), 2.0);
        assert!((consensus_from_counts(&[1, 2, 2, 3, 3]) - 2.2).abs() < 1e-12);
        assert_eq!(consensus_from_counts(&[3, 3, 3, 3, 3]), 3.0);
        // Exactly half is not a strict majority.
        assert_eq!(consensus_from_counts(&[1, 1, 3, 3]), 2.0);
    }

    #[test]
    fn cluster_count_ignores_noise() {
        assert_eq!(cluster_count(&[0, 1, 1, 2]), 2);
        assert_eq!(cluster_count(&[0, 0]), 0);
        assert_eq!(cluster_count(&[5, 5, 5]), 1);
    }

    #[test]
    fn round_half_up() {
        assert_eq!(round_count(2.5), 3);
        assert_eq!(round_count(2.2), 2);
        assert_eq!(round_count(0.0), 0);
    }
}
