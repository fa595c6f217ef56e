//! Rater-agreement and evaluation measures.
//!
//! Everything here works on the pairwise co-membership view of a labelling:
//! two points are "similar" when they carry the same label (noise included),
//! so cluster IDs never need to correspond across raters. Agreement values
//! are computed from label contingency counts in O(N) per rater pair rather
//! than by materialising N×N matrices; [`similarity_matrix`] is provided for
//! the loss and for reference checks.

mod report;
mod vanbelle;

pub use report::{
    count_metrics, evaluate_plot, regression_metrics, stratified_report, CountMetrics, MetricReport,
    PlotScores, Regression, Stratum,
};
pub use vanbelle::{vanbelle, vanbelle_categorical};

use std::collections::HashMap;

use crate::error::{shape_err, Error, Result};

/// Dense N×N co-membership matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    pub n: usize,
    pub entries: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// `S[i][j] = 1` iff `labels[i] == labels[j]`.
pub fn similarity_matrix(labels: &[u32]) -> SimilarityMatrix {
    let n = labels.len();
    let mut entries = Vec::with_capacity(n * n);
    for &a in labels {
        entries.extend(labels.iter().map(|&b| if a == b { 1.0 } else { 0.0 }));
    }
    SimilarityMatrix { n, entries }
}

/// Dense relabelling of a labelling to `0..k`, with per-label sizes.
pub(crate) struct Partition {
    pub ids: Vec<usize>,
    pub sizes: Vec<usize>,
}

impl Partition {
    pub fn new(labels: &[u32]) -> Self {
        let mut map: HashMap<u32, usize> = HashMap::new();
        let mut sizes = Vec::new();
        let ids = labels
            .iter()
            .map(|l| {
                let id = *map.entry(*l).or_insert_with(|| {
                    sizes.push(0);
                    sizes.len() - 1
                });
                sizes[id] += 1;
                id
            })
            .collect();
        Self { ids, sizes }
    }

    /// Size of the block containing point `i`.
    pub fn block(&self, i: usize) -> usize {
        self.sizes[self.ids[i]]
    }

    /// Number of unordered point pairs sharing a block.
    pub fn same_pairs(&self) -> usize {
        self.sizes.iter().map(|&s| s * (s - 1) / 2).sum()
    }
}

/// For each point, the number of `j` (including `i`) on which the two
/// partitions agree about co-membership with `i`.
pub(crate) fn agreeing_counts(a: &Partition, b: &Partition) -> Vec<usize> {
    let n = a.ids.len();
    let mut joint: HashMap<(usize, usize), usize> = HashMap::new();
    for (&x, &y) in a.ids.iter().zip(&b.ids) {
        *joint.entry((x, y)).or_insert(0) += 1;
    }
    (0..n)
        .map(|i| {
            let both = joint[&(a.ids[i], b.ids[i])];
            n + 2 * both - a.block(i) - b.block(i)
        })
        .collect()
}

fn check_lengths<L: AsRef<[u32]>>(op: &'static str, n: usize, group: &[L]) -> Result<()> {
    for (m, labels) in group.iter().enumerate() {
        if labels.as_ref().len() != n {
            return Err(shape_err(
                op,
                format!("annotation {m} has {} labels, expected {n}", labels.as_ref().len()),
            ));
        }
    }
    Ok(())
}

/// Per-point agreement between two raters:
/// `γ_i = (1/N) Σ_j (1 − |S_ij(a) − S_ij(b)|)`.
pub fn pair_agreement(a: &[u32], b: &[u32]) -> Result<Vec<f64>> {
    check_lengths("pair_agreement", a.len(), &[b])?;
    let n = a.len() as f64;
    Ok(agreeing_counts(&Partition::new(a), &Partition::new(b))
        .into_iter()
        .map(|c| c as f64 / n)
        .collect())
}

/// Mean of [`pair_agreement`] over all unordered rater pairs.
pub fn group_agreement<L: AsRef<[u32]>>(group: &[L]) -> Result<Vec<f64>> {
    if group.len() < 2 {
        return Err(Error::Data(format!(
            "agreement needs at least 2 annotations, got {}",
            group.len()
        )));
    }
    let n = group[0].as_ref().len();
    check_lengths("group_agreement", n, group)?;
    let parts: Vec<Partition> = group.iter().map(|l| Partition::new(l.as_ref())).collect();
    let refs: Vec<&Partition> = parts.iter().collect();
    Ok(group_agreement_parts(&refs, n))
}

fn group_agreement_parts(parts: &[&Partition], n: usize) -> Vec<f64> {
    let mut sums = vec![0usize; n];
    let mut pairs = 0usize;
    for a in 0..parts.len() {
        for b in a + 1..parts.len() {
            for (s, c) in sums.iter_mut().zip(agreeing_counts(parts[a], parts[b])) {
                *s += c;
            }
            pairs += 1;
        }
    }
    let denom = (pairs * n) as f64;
    sums.into_iter().map(|s| s as f64 / denom).collect()
}

/// Group agreement `A(G)`: [`group_agreement`] averaged over points.
pub fn mean_agreement<L: AsRef<[u32]>>(group: &[L]) -> Result<f64> {
    let gamma = group_agreement(group)?;
    Ok(mean(&gamma))
}

fn mean_agreement_parts(parts: &[&Partition], n: usize) -> f64 {
    mean(&group_agreement_parts(parts, n))
}

pub(crate) fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Agreement index χ: the mean change in group agreement when the prediction
/// replaces each rater in turn. Positive values mean the prediction raises
/// agreement.
pub fn chi<L: AsRef<[u32]>>(prediction: &[u32], group: &[L]) -> Result<f64> {
    if group.len() < 2 {
        return Err(Error::Data(format!(
            "agreement index needs at least 2 annotations, got {}",
            group.len()
        )));
    }
    let n = prediction.len();
    check_lengths("chi", n, group)?;
    let parts: Vec<Partition> = group.iter().map(|l| Partition::new(l.as_ref())).collect();
    let pred = Partition::new(prediction);
    let refs: Vec<&Partition> = parts.iter().collect();
    let base = mean_agreement_parts(&refs, n);
    let mut total = 0.0;
    for m in 0..parts.len() {
        let mut replaced = refs.clone();
        replaced[m] = &pred;
        total += mean_agreement_parts(&replaced, n) - base;
    }
    Ok(total / parts.len() as f64)
}

/// Mean Jaccard index between the predicted noise set and each rater's noise
/// set. Two empty sets count as a perfect match.
pub fn noise_iou<L: AsRef<[u32]>>(prediction: &[u32], group: &[L]) -> Result<f64> {
    if group.is_empty() {
        return Err(Error::Data("noise IoU needs at least 1 annotation".into()));
    }
    check_lengths("noise_iou", prediction.len(), group)?;
    let total: f64 = group
        .iter()
        .map(|labels| {
            let (mut inter, mut union) = (0usize, 0usize);
            for (&p, &r) in prediction.iter().zip(labels.as_ref()) {
                let (p, r) = (p == crate::NOISE, r == crate::NOISE);
                inter += usize::from(p && r);
                union += usize::from(p || r);
            }
            if union == 0 {
                1.0
            } else {
                inter as f64 / union as f64
            }
        })
        .sum();
    Ok(total / group.len() as f64)
}
