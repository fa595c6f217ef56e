//! Per-plot scoring and stratified aggregation.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{chi, noise_iou, vanbelle, vanbelle_categorical};
use crate::data::{consensus_cluster_count, consensus_from_counts, round_count, AnnotatedPlot};
use crate::error::{shape_err, Error, Result};

/// Scores of one prediction against one rater group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotScores {
    pub id: String,
    pub chi: f64,
    pub vanbelle: f64,
    /// Present only when at least one rater marked noise.
    pub noise_iou: Option<f64>,
    pub consensus_count: f64,
}

pub fn evaluate_plot(prediction: &[u32], plot: &AnnotatedPlot) -> Result<PlotScores> {
    let group = plot.group.label_sets();
    let noise = if plot.group.has_noise() {
        Some(noise_iou(prediction, &group)?)
    } else {
        None
    };
    Ok(PlotScores {
        id: plot.id().to_string(),
        chi: chi(prediction, &group)?,
        vanbelle: vanbelle(prediction, &group)?,
        noise_iou: noise,
        consensus_count: consensus_cluster_count(&plot.group),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stratum {
    /// Consensus cluster count, rounded half up.
    pub count: usize,
    pub n_samples: usize,
    pub chi: f64,
    pub vanbelle: f64,
    pub noise_iou: Option<f64>,
    pub n_noise_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regression {
    pub mse: f64,
    pub mae: f64,
}

/// Aggregated evaluation. Overall values are sample-weighted means of the
/// strata; noise IoU is weighted by the plots that contain noise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub chi: f64,
    pub vanbelle: f64,
    pub noise_iou: Option<f64>,
    pub n_samples: usize,
    pub n_noise_samples: usize,
    pub strata: Vec<Stratum>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regression: Option<Regression>,
}

impl MetricReport {
    /// Copy with χ (overall and per stratum) multiplied by `factor`.
    pub fn scale_chi(&self, factor: f64) -> MetricReport {
        let mut out = self.clone();
        out.chi *= factor;
        for s in &mut out.strata {
            s.chi *= factor;
        }
        out
    }
}

pub fn stratified_report(results: &[PlotScores]) -> Result<MetricReport> {
    if results.is_empty() {
        return Err(Error::Data("cannot build a report from zero plots".into()));
    }
    let mut groups: BTreeMap<usize, Vec<&PlotScores>> = BTreeMap::new();
    for r in results {
        groups.entry(round_count(r.consensus_count)).or_default().push(r);
    }
    let strata: Vec<Stratum> = groups
        .into_iter()
        .map(|(count, members)| {
            let n = members.len() as f64;
            let noisy: Vec<f64> = members.iter().filter_map(|r| r.noise_iou).collect();
            Stratum {
                count,
                n_samples: members.len(),
                chi: members.iter().map(|r| r.chi).sum::<f64>() / n,
                vanbelle: members.iter().map(|r| r.vanbelle).sum::<f64>() / n,
                noise_iou: (!noisy.is_empty()).then(|| noisy.iter().sum::<f64>() / noisy.len() as f64),
                n_noise_samples: noisy.len(),
            }
        })
        .collect();

    let n_samples: usize = strata.iter().map(|s| s.n_samples).sum();
    let n_noise: usize = strata.iter().map(|s| s.n_noise_samples).sum();
    let weighted = |f: &dyn Fn(&Stratum) -> f64| {
        strata.iter().map(|s| s.n_samples as f64 * f(s)).sum::<f64>() / n_samples as f64
    };
    let noise_iou = (n_noise > 0).then(|| {
        strata
            .iter()
            .filter_map(|s| s.noise_iou.map(|v| v * s.n_noise_samples as f64))
            .sum::<f64>()
            / n_noise as f64
    });
    Ok(MetricReport {
        chi: weighted(&|s| s.chi),
        vanbelle: weighted(&|s| s.vanbelle),
        noise_iou,
        n_samples,
        n_noise_samples: n_noise,
        strata,
        regression: None,
    })
}

/// Mean squared and mean absolute error over every point of every plot.
pub fn regression_metrics<P: AsRef<[f64]>, T: AsRef<[f64]>>(
    predicted: &[P],
    target: &[T],
) -> Result<Regression> {
    if predicted.len() != target.len() {
        return Err(shape_err(
            "regression_metrics",
            format!("{} predicted plots vs {} targets", predicted.len(), target.len()),
        ));
    }
    let (mut se, mut ae, mut count) = (0.0, 0.0, 0usize);
    for (i, (p, t)) in predicted.iter().zip(target).enumerate() {
        let (p, t) = (p.as_ref(), t.as_ref());
        if p.len() != t.len() {
            return Err(shape_err(
                "regression_metrics",
                format!("plot {i}: {} predicted values vs {} targets", p.len(), t.len()),
            ));
        }
        for (a, b) in p.iter().zip(t) {
            se += (a - b) * (a - b);
            ae += (a - b).abs();
        }
        count += p.len();
    }
    if count == 0 {
        return Ok(Regression { mse: 0.0, mae: 0.0 });
    }
    Ok(Regression {
        mse: se / count as f64,
        mae: ae / count as f64,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountMetrics {
    pub vanbelle: f64,
    pub accuracy: f64,
    pub f1: f64,
}

const SINGLE: usize = 0;
const MULTI: usize = 1;

fn binarize(count: usize) -> usize {
    if count > 1 {
        MULTI
    } else {
        SINGLE
    }
}

/// Single-vs-multiple cluster agreement between predicted counts and rater
/// counts. The reference label of a plot is its consensus count (rounded half
/// up) binarized; the positive class is "multiple".
pub fn count_metrics<G: AsRef<[usize]>>(predicted: &[usize], group_counts: &[G]) -> Result<CountMetrics> {
    if predicted.is_empty() || predicted.len() != group_counts.len() {
        return Err(shape_err(
            "count_metrics",
            format!("{} predictions vs {} groups", predicted.len(), group_counts.len()),
        ));
    }
    let members = group_counts[0].as_ref().len();
    if members == 0 || group_counts.iter().any(|g| g.as_ref().len() != members) {
        return Err(shape_err("count_metrics", "every plot needs the same nonzero rater count"));
    }
    let pred: Vec<usize> = predicted.iter().map(|&c| binarize(c)).collect();
    let by_member: Vec<Vec<usize>> = (0..members)
        .map(|m| group_counts.iter().map(|g| binarize(g.as_ref()[m])).collect())
        .collect();
    let truth: Vec<usize> = group_counts
        .iter()
        .map(|g| binarize(round_count(consensus_from_counts(g.as_ref()))))
        .collect();

    let (mut tp, mut fp, mut fn_, mut correct) = (0usize, 0usize, 0usize, 0usize);
    for (&p, &t) in pred.iter().zip(&truth) {
        correct += usize::from(p == t);
        match (p, t) {
            (MULTI, MULTI) => tp += 1,
            (MULTI, SINGLE) => fp += 1,
            (SINGLE, MULTI) => fn_ += 1,
            _ => {}
        }
    }
    let f1 = if tp + fp + fn_ == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
    };
    Ok(CountMetrics {
        vanbelle: vanbelle_categorical(&pred, &by_member, 2)?,
        accuracy: correct as f64 / pred.len() as f64,
        f1,
    })
}
