use std::collections::HashMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use percluster::baselines::{grid_search, Algorithm, BaselineSpec, GridSpec};
use percluster::data::cluster_count;
use rayon::prelude::*;
use serde::Serialize;

use crate::evaluate::{score, write_report, PredictionRecord};
use crate::files::{self, usage, DataArgs};
use crate::Shared;

#[derive(Args, Debug)]
pub struct SearchArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Search the default grid of this algorithm (dbscan, kmeans, ward or
    /// gmm) when no --config grid is given.
    #[arg(long)]
    algorithm: Option<Algorithm>,
}

#[derive(Serialize)]
struct SearchRow {
    candidate: String,
    mean_chi_x100: f64,
    mean_vanbelle: f64,
    mean_noise_iou: Option<f64>,
}

/// Writes the score table as CSV; with --out, the winning spec is also
/// written next to it as JSON, ready for `baseline-eval --config`.
pub fn search(shared: &Shared, args: SearchArgs) -> Result<()> {
    let grid = match (&shared.config, args.algorithm) {
        (Some(path), algorithm) => {
            let grid: GridSpec = files::read_json(path)?;
            if algorithm.is_some_and(|a| a != grid.algorithm) {
                return Err(usage("--algorithm disagrees with the grid file"));
            }
            grid
        }
        (None, Some(algorithm)) => GridSpec::default_for(algorithm),
        (None, None) => return Err(usage("baseline-search needs --config or --algorithm")),
    };
    let plots = args.data.load()?;
    let result = grid_search(&grid, &plots, shared.seed.unwrap_or(0))?;
    let rows = result.table.iter().map(|row| SearchRow {
        candidate: row.candidate.to_string(),
        mean_chi_x100: 100.0 * row.mean_chi,
        mean_vanbelle: row.mean_vanbelle,
        mean_noise_iou: row.mean_noise_iou,
    });
    let csv = files::csv_bytes(rows)?;
    files::emit(shared.out.as_deref(), &csv)?;
    if let Some(out) = &shared.out {
        files::emit(Some(&out.with_extension("best.json")), &files::pretty_json(&result.best.candidate)?)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct BaselineEvalArgs {
    #[command(flatten)]
    data: DataArgs,

    /// Also write the baseline's labels in the `predict` format.
    #[arg(long)]
    predictions_out: Option<PathBuf>,
}

pub fn baseline_eval(shared: &Shared, args: BaselineEvalArgs) -> Result<()> {
    let path = shared
        .config
        .as_deref()
        .ok_or_else(|| usage("baseline-eval needs --config with a baseline spec"))?;
    let spec: BaselineSpec = files::read_json(path)?;
    let seed = shared.seed.unwrap_or(0);
    let plots = args.data.load()?;
    let records: Vec<PredictionRecord> = plots
        .par_iter()
        .map(|plot| {
            let labels = spec.run(plot, seed).with_context(|| format!("stimulus '{}'", plot.id()))?;
            Ok(PredictionRecord {
                id: plot.id().to_string(),
                cluster_count: Some(cluster_count(&labels)),
                labels,
                agreement: None,
            })
        })
        .collect::<Result<_>>()?;
    if let Some(out) = &args.predictions_out {
        files::emit(Some(out), &files::jsonl(&records)?)?;
    }
    let by_id: HashMap<String, PredictionRecord> = records.into_iter().map(|r| (r.id.clone(), r)).collect();
    write_report(shared.out.as_deref(), &score(&plots, &by_id)?)
}
