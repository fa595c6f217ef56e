//! Classical clustering baselines and their parameter search.

mod dbscan;
mod gmm;
mod kmeans;
mod ward;

pub use dbscan::dbscan;
pub use gmm::{gmm, gmm_fit, Cov2, GmmFit, GMM_MAX_ITER, GMM_REG, GMM_TOL};
pub use kmeans::{kmeans, kmeans_fit, KmeansFit, KMEANS_MAX_ITER};
pub use ward::{cut_merges, ward, ward_merges};

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{consensus_cluster_count, round_count, AnnotatedPlot};
use crate::error::{Error, Result};
use crate::metrics::{evaluate_plot, mean, PlotScores};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Dbscan,
    Kmeans,
    Ward,
    Gmm,
}

impl Algorithm {
    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Dbscan => "dbscan",
            Algorithm::Kmeans => "kmeans",
            Algorithm::Ward => "ward",
            Algorithm::Gmm => "gmm",
        }
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dbscan" => Ok(Algorithm::Dbscan),
            "kmeans" => Ok(Algorithm::Kmeans),
            "ward" => Ok(Algorithm::Ward),
            "gmm" => Ok(Algorithm::Gmm),
            other => Err(Error::Config(format!("unknown algorithm {other:?}"))),
        }
    }
}

/// Cluster count for the partitioning baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    Fixed(usize),
    /// The rounded consensus count of the plot's raters (at least 1).
    Oracle,
}

/// One fully specified baseline run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "lowercase")]
pub enum BaselineSpec {
    Dbscan { eps: f64, min_pts: usize },
    Kmeans { k: KChoice },
    Ward { k: KChoice },
    Gmm { k: KChoice },
}

impl BaselineSpec {
    pub fn algorithm(&self) -> Algorithm {
        match self {
            BaselineSpec::Dbscan { .. } => Algorithm::Dbscan,
            BaselineSpec::Kmeans { .. } => Algorithm::Kmeans,
            BaselineSpec::Ward { .. } => Algorithm::Ward,
            BaselineSpec::Gmm { .. } => Algorithm::Gmm,
        }
    }

    /// Clusters one plot. Oracle mode reads the plot's rater group.
    pub fn run(&self, plot: &AnnotatedPlot, seed: u64) -> Result<Vec<u32>> {
        let points = &plot.pointset.points;
        let resolve = |k: &KChoice| -> Result<usize> {
            match *k {
                KChoice::Fixed(k) => Ok(k),
                KChoice::Oracle => {
                    if plot.group.is_empty() {
                        return Err(Error::Config(format!("plot {} has no annotations for oracle k", plot.id())));
                    }
                    Ok(round_count(consensus_cluster_count(&plot.group)).clamp(1, points.len()))
                }
            }
        };
        match self {
            BaselineSpec::Dbscan { eps, min_pts } => dbscan(points, *eps, *min_pts),
            BaselineSpec::Kmeans { k } => kmeans(points, resolve(k)?, seed),
            BaselineSpec::Ward { k } => ward(points, resolve(k)?),
            BaselineSpec::Gmm { k } => gmm(points, resolve(k)?, seed),
        }
    }
}

impl fmt::Display for BaselineSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let k_str = |k: &KChoice| match k {
            KChoice::Fixed(k) => k.to_string(),
            KChoice::Oracle => "oracle".to_string(),
        };
        match self {
            BaselineSpec::Dbscan { eps, min_pts } => write!(f, "dbscan(eps={eps},min_pts={min_pts})"),
            BaselineSpec::Kmeans { k } => write!(f, "kmeans(k={})", k_str(k)),
            BaselineSpec::Ward { k } => write!(f, "ward(k={})", k_str(k)),
            BaselineSpec::Gmm { k } => write!(f, "gmm(k={})", k_str(k)),
        }
    }
}

/// Candidate lists per parameter. DBSCAN uses `eps` × `min_pts`; the other
/// algorithms use `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub algorithm: Algorithm,
    #[serde(default)]
    pub eps: Vec<f64>,
    #[serde(default)]
    pub min_pts: Vec<usize>,
    #[serde(default)]
    pub k: Vec<usize>,
}

impl GridSpec {
    /// Defaults sized for plots normalized to [-1, 1]².
    pub fn default_for(algorithm: Algorithm) -> Self {
        match algorithm {
            Algorithm::Dbscan => Self {
                algorithm,
                eps: vec![0.025, 0.05, 0.075, 0.1, 0.15, 0.2],
                min_pts: vec![3, 5, 8, 12],
                k: Vec::new(),
            },
            _ => Self {
                algorithm,
                eps: Vec::new(),
                min_pts: Vec::new(),
                k: (1..=8).collect(),
            },
        }
    }

    /// Candidates in grid order (`eps` outermost for DBSCAN).
    pub fn candidates(&self) -> Result<Vec<BaselineSpec>> {
        let out: Vec<BaselineSpec> = match self.algorithm {
            Algorithm::Dbscan => self
                .eps
                .iter()
                .flat_map(|&eps| self.min_pts.iter().map(move |&min_pts| BaselineSpec::Dbscan { eps, min_pts }))
                .collect(),
            Algorithm::Kmeans => self.k.iter().map(|&k| BaselineSpec::Kmeans { k: KChoice::Fixed(k) }).collect(),
            Algorithm::Ward => self.k.iter().map(|&k| BaselineSpec::Ward { k: KChoice::Fixed(k) }).collect(),
            Algorithm::Gmm => self.k.iter().map(|&k| BaselineSpec::Gmm { k: KChoice::Fixed(k) }).collect(),
        };
        if out.is_empty() {
            return Err(Error::Config(format!("empty {} grid", self.algorithm.as_str())));
        }
        Ok(out)
    }
}

/// Mean scores of one candidate across a split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScore {
    pub candidate: BaselineSpec,
    pub mean_chi: f64,
    pub mean_vanbelle: f64,
    /// Over plots whose raters marked noise; `None` if there are none.
    pub mean_noise_iou: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchResult {
    pub best: CandidateScore,
    pub table: Vec<CandidateScore>,
}

/// Scores of one spec on every plot, in plot order.
pub fn evaluate_spec(spec: &BaselineSpec, plots: &[AnnotatedPlot], seed: u64) -> Result<Vec<PlotScores>> {
    plots
        .par_iter()
        .map(|p| evaluate_plot(&spec.run(p, seed)?, p))
        .collect()
}

pub fn summarize(candidate: BaselineSpec, scores: &[PlotScores]) -> CandidateScore {
    let chis: Vec<f64> = scores.iter().map(|s| s.chi).collect();
    let vs: Vec<f64> = scores.iter().map(|s| s.vanbelle).collect();
    let ious: Vec<f64> = scores.iter().filter_map(|s| s.noise_iou).collect();
    CandidateScore {
        candidate,
        mean_chi: mean(&chis),
        mean_vanbelle: mean(&vs),
        mean_noise_iou: (!ious.is_empty()).then(|| mean(&ious)),
    }
}

/// Scores every candidate by mean χ over `plots`; the first best candidate
/// in grid order wins.
pub fn grid_search(grid: &GridSpec, plots: &[AnnotatedPlot], seed: u64) -> Result<SearchResult> {
    let candidates = grid.candidates()?;
    if plots.is_empty() {
        return Err(Error::Data("grid search needs at least one plot".into()));
    }
    let jobs: Vec<(usize, usize)> = (0..candidates.len())
        .flat_map(|c| (0..plots.len()).map(move |p| (c, p)))
        .collect();
    let scores: Vec<PlotScores> = jobs
        .par_iter()
        .map(|&(c, p)| evaluate_plot(&candidates[c].run(&plots[p], seed)?, &plots[p]))
        .collect::<Result<_>>()?;
    let table: Vec<CandidateScore> = candidates
        .iter()
        .zip(scores.chunks(plots.len()))
        .map(|(c, s)| summarize(*c, s))
        .collect();
    let mut best = 0;
    for (i, row) in table.iter().enumerate() {
        if row.mean_chi > table[best].mean_chi {
            best = i;
        }
    }
    Ok(SearchResult {
        best: table[best].clone(),
        table,
    })
}
