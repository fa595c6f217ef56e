//! Training objectives.
//!
//! Each loss is available twice: as a plain function on slices, and as a
//! recorder that appends the same computation to a [`Tape`] so it can be
//! differentiated through the network.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Tape, Tensor, Var};
use crate::error::{shape_err, Result};
use crate::metrics::{similarity_matrix, SimilarityMatrix};

/// Weight of the pairwise term in the total loss.
pub const MCL_SCALE: f64 = 0.1;
/// Weight on noise points in the noise loss.
pub const NOISE_WEIGHT: f64 = 0.9;
/// Weight on clustered points in the noise loss.
pub const CLUSTER_WEIGHT: f64 = 0.1;

/// Per-pair weights: `1/w_c²` for pairs sharing cluster `c` (with `w_c` the
/// fraction of points in `c`) and `D` for pairs in different clusters.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    pub n: usize,
    pub negative_momentum: f64,
    pub entries: Vec<f64>,
}

pub fn weight_matrix(labels: &[u32], negative_momentum: f64) -> WeightMatrix {
    let n = labels.len();
    let mut sizes: HashMap<u32, usize> = HashMap::new();
    for &l in labels {
        *sizes.entry(l).or_insert(0) += 1;
    }
    let mut entries = Vec::with_capacity(n * n);
    for &a in labels {
        let frac = sizes[&a] as f64 / n as f64;
        let same = 1.0 / (frac * frac);
        entries.extend(labels.iter().map(|&b| if a == b { same } else { negative_momentum }));
    }
    WeightMatrix {
        n,
        negative_momentum,
        entries,
    }
}

/// `−Σ_ij W_ij [S_ij ln Ŝ_ij + (1 − S_ij) ln(1 − Ŝ_ij)]` with `Ŝ` clamped
/// away from 0 and 1. The diagonal is included.
///
/// Terms are summed in ascending order, so the value is bit-identical under
/// any consistent permutation of the points.
pub fn mcl_loss(target: &SimilarityMatrix, estimate: &[f64], weights: &WeightMatrix) -> Result<f64> {
    let nn = target.n * target.n;
    if estimate.len() != nn || weights.entries.len() != nn {
        return Err(shape_err(
            "mcl_loss",
            format!(
                "target {}², estimate {} entries, weights {}²",
                target.n,
                estimate.len(),
                weights.n
            ),
        ));
    }
    let mut terms: Vec<f64> = estimate
        .iter()
        .zip(&target.entries)
        .zip(&weights.entries)
        .map(|((&p, &t), &w)| crate::autodiff::bce_term(p, t, w))
        .collect();
    terms.sort_unstable_by(f64::total_cmp);
    Ok(-terms.iter().sum::<f64>())
}

/// Binary noise indicators: 1 for noise points.
pub fn noise_targets(labels: &[u32]) -> Vec<f64> {
    labels
        .iter()
        .map(|&l| if l == crate::NOISE { 1.0 } else { 0.0 })
        .collect()
}

fn noise_weights(targets: &[f64]) -> Vec<f64> {
    let n = targets.len().max(1) as f64;
    targets
        .iter()
        .map(|&t| if t == 1.0 { NOISE_WEIGHT / n } else { CLUSTER_WEIGHT / n })
        .collect()
}

/// `−(1/N) Σ [0.9 νᵢ ln ν̂ᵢ + 0.1 (1 − νᵢ) ln(1 − ν̂ᵢ)]` where `ν̂` is the
/// predicted noise probability.
pub fn noise_loss(targets: &[f64], noise_prob: &[f64]) -> Result<f64> {
    if targets.len() != noise_prob.len() {
        return Err(shape_err(
            "noise_loss",
            format!("{} targets vs {} predictions", targets.len(), noise_prob.len()),
        ));
    }
    Ok(crate::autodiff::tape_bce(noise_prob, targets, &noise_weights(targets)))
}

/// Mean absolute error between target and predicted agreement.
pub fn agree_loss(target: &[f64], predicted: &[f64]) -> Result<f64> {
    if target.len() != predicted.len() {
        return Err(shape_err(
            "agree_loss",
            format!("{} targets vs {} predictions", target.len(), predicted.len()),
        ));
    }
    Ok(crate::metrics::mean(
        &target.iter().zip(predicted).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>(),
    ))
}

pub fn total_loss(mcl: f64, noise: f64, agree: f64) -> f64 {
    MCL_SCALE * mcl + noise + agree
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub mcl: f64,
    pub noise: f64,
    pub agree: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn new(mcl: f64, noise: f64, agree: f64) -> Self {
        Self {
            mcl,
            noise,
            agree,
            total: total_loss(mcl, noise, agree),
        }
    }
}

/// Tape nodes of a recorded loss.
#[derive(Debug, Clone, Copy)]
pub struct LossVars {
    pub mcl: Var,
    pub noise: Var,
    pub agree: Var,
    pub total: Var,
}

impl LossVars {
    pub fn breakdown(&self, tape: &Tape) -> LossBreakdown {
        LossBreakdown {
            mcl: tape.value(self.mcl).item(),
            noise: tape.value(self.noise).item(),
            agree: tape.value(self.agree).item(),
            total: tape.value(self.total).item(),
        }
    }
}

/// Records the pairwise loss of `cluster_probs` (N×C, rows summing to one)
/// against `labels`.
pub fn record_mcl(tape: &mut Tape, cluster_probs: Var, labels: &[u32], negative_momentum: f64) -> Result<Var> {
    let s_hat = tape.matmul_nt(cluster_probs, cluster_probs)?;
    let target = similarity_matrix(labels);
    let weights = weight_matrix(labels, negative_momentum);
    tape.weighted_bce(s_hat, Arc::new(target.entries), Arc::new(weights.entries))
}

pub fn record_noise(tape: &mut Tape, noise_prob: Var, labels: &[u32]) -> Result<Var> {
    let targets = noise_targets(labels);
    let weights = noise_weights(&targets);
    tape.weighted_bce(noise_prob, Arc::new(targets), Arc::new(weights))
}

pub fn record_agree(tape: &mut Tape, agreement: Var, target: &[f64]) -> Result<Var> {
    let shape = tape.value(agreement).shape.clone();
    let t = tape.constant(Tensor::new(shape, target.to_vec())?);
    let diff = tape.sub(agreement, t)?;
    let abs = tape.abs(diff);
    Ok(tape.mean(abs))
}

/// Records all three terms and their weighted sum.
pub fn record_total(
    tape: &mut Tape,
    cluster_probs: Var,
    noise_prob: Var,
    agreement: Var,
    labels: &[u32],
    agreement_target: &[f64],
    negative_momentum: f64,
) -> Result<LossVars> {
    let mcl = record_mcl(tape, cluster_probs, labels, negative_momentum)?;
    let noise = record_noise(tape, noise_prob, labels)?;
    let agree = record_agree(tape, agreement, agreement_target)?;
    let scaled = tape.scale(mcl, MCL_SCALE);
    let partial = tape.add(scaled, noise)?;
    let total = tape.add(partial, agree)?;
    Ok(LossVars {
        mcl,
        noise,
        agree,
        total,
    })
}
