use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use percluster::data::{cluster_count, AnnotatedPlot};
use percluster::metrics::{evaluate_plot, group_agreement, regression_metrics, stratified_report, MetricReport};
use percluster::model::{extract_clustering, model_forward, Checkpoint, Mode};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::files::{self, data, usage, DataArgs};
use crate::Shared;

/// One line of `predict` output, and the input format of `eval`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub id: String,
    pub labels: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub agreement: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster_count: Option<usize>,
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Model checkpoint (`model.ckpt` from a training run).
    #[arg(long)]
    checkpoint: PathBuf,

    #[command(flatten)]
    data: DataArgs,

    /// Points whose noise probability exceeds this are labelled 0.
    #[arg(long, default_value_t = 0.5)]
    threshold: f64,
}

pub fn predict(shared: &Shared, args: PredictArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.threshold) {
        return Err(usage(format!("--threshold must lie in [0, 1], got {}", args.threshold)));
    }
    let ck = Checkpoint::load(&args.checkpoint).with_context(|| format!("loading {}", args.checkpoint.display()))?;
    let plots = args.data.load()?;
    let records: Vec<PredictionRecord> = plots
        .par_iter()
        .map(|plot| {
            let out = model_forward(&plot.pointset.points, &ck.params, &ck.config, Mode::Infer)
                .with_context(|| format!("stimulus '{}'", plot.id()))?;
            let labels = extract_clustering(&out, args.threshold);
            Ok(PredictionRecord {
                id: plot.id().to_string(),
                cluster_count: Some(cluster_count(&labels)),
                labels,
                agreement: Some(out.agreement),
            })
        })
        .collect::<Result<_>>()?;
    files::emit(shared.out.as_deref(), &files::jsonl(&records)?)
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Predictions in JSON Lines, as written by `predict`.
    #[arg(long)]
    predictions: PathBuf,

    #[command(flatten)]
    data: DataArgs,
}

pub fn eval(shared: &Shared, args: EvalArgs) -> Result<()> {
    let predictions = read_predictions(&args.predictions)?;
    let plots = args.data.load()?;
    let report = score(&plots, &predictions)?;
    write_report(shared.out.as_deref(), &report)
}

fn read_predictions(path: &Path) -> Result<HashMap<String, PredictionRecord>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut map = HashMap::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| data(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        if map.contains_key(&rec.id) {
            return Err(data(format!("{}: duplicate prediction for '{}'", path.display(), rec.id)));
        }
        map.insert(rec.id.clone(), rec);
    }
    Ok(map)
}

/// Stratified report over `plots`. Every plot needs a prediction; the
/// agreement error is included only when every prediction carries one.
pub fn score(plots: &[AnnotatedPlot], predictions: &HashMap<String, PredictionRecord>) -> Result<MetricReport> {
    if plots.is_empty() {
        return Err(data("empty dataset"));
    }
    let missing: Vec<&str> = plots.iter().map(|p| p.id()).filter(|id| !predictions.contains_key(*id)).collect();
    if !missing.is_empty() {
        return Err(data(format!("missing predictions for {} plot(s): {}", missing.len(), missing.join(", "))));
    }
    let paired: Vec<(&AnnotatedPlot, &PredictionRecord)> = plots.iter().map(|p| (p, &predictions[p.id()])).collect();
    for (plot, rec) in &paired {
        if rec.labels.len() != plot.pointset.len() {
            return Err(data(format!(
                "prediction for '{}' has {} labels for {} points",
                plot.id(),
                rec.labels.len(),
                plot.pointset.len()
            )));
        }
    }
    let scores = paired
        .par_iter()
        .map(|(plot, rec)| evaluate_plot(&rec.labels, plot).with_context(|| format!("stimulus '{}'", plot.id())))
        .collect::<Result<Vec<_>>>()?;
    let mut report = stratified_report(&scores)?;
    if paired.iter().all(|(_, r)| r.agreement.is_some()) {
        let predicted: Vec<&[f64]> = paired.iter().map(|(_, r)| r.agreement.as_deref().unwrap_or(&[])).collect();
        let target = paired
            .iter()
            .map(|(p, _)| group_agreement(&p.group.label_sets()))
            .collect::<percluster::Result<Vec<_>>>()?;
        report.regression = Some(regression_metrics(&predicted, &target)?);
    }
    Ok(report.scale_chi(100.0))
}

#[derive(Serialize)]
struct ReportRow {
    count: String,
    n_samples: usize,
    chi_x100: f64,
    vanbelle: f64,
    noise_iou: Option<f64>,
    n_noise_samples: usize,
}

/// JSON report to `out` (stdout without one) and a CSV of the strata next
/// to it.
pub fn write_report(out: Option<&Path>, report: &MetricReport) -> Result<()> {
    let json = files::pretty_json(report)?;
    let Some(out) = out else {
        return files::emit(None, &json);
    };
    files::emit(Some(out), &json)?;
    let rows = report
        .strata
        .iter()
        .map(|s| ReportRow {
            count: s.count.to_string(),
            n_samples: s.n_samples,
            chi_x100: s.chi,
            vanbelle: s.vanbelle,
            noise_iou: s.noise_iou,
            n_noise_samples: s.n_noise_samples,
        })
        .chain(std::iter::once(ReportRow {
            count: "all".into(),
            n_samples: report.n_samples,
            chi_x100: report.chi,
            vanbelle: report.vanbelle,
            noise_iou: report.noise_iou,
            n_noise_samples: report.n_noise_samples,
        }));
    files::emit(Some(&files::csv_sibling(out)), &files::csv_bytes(rows)?)
}
