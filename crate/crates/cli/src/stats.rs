use std::collections::BTreeMap;
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::Args;
use percluster::data::{consensus_cluster_count, gen_synthetic, round_count, save_dataset, split_dataset, write_splits, SyntheticSpec};
use percluster::metrics::mean_agreement;
use serde::Serialize;

use crate::files::{self, data, usage, DataArgs};
use crate::Shared;

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Also assign train/val/test splits and write them here.
    #[arg(long)]
    splits_out: Option<PathBuf>,

    /// Train, val and test fractions used with --splits-out.
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
    ratios: Vec<f64>,
}

pub fn synth(shared: &Shared, args: SynthArgs) -> Result<()> {
    let mut spec: SyntheticSpec = files::read_config(shared.config.as_deref())?;
    if let Some(seed) = shared.seed {
        spec.seed = seed;
    }
    let out = files::require_out(shared.out.as_deref(), "synth")?;
    let plots = gen_synthetic(&spec)?;
    let mut bytes = Vec::new();
    save_dataset(&plots, &mut bytes)?;
    files::emit(Some(&out), &bytes)?;

    if let Some(path) = args.splits_out {
        let ratios: [f64; 3] = args
            .ratios
            .try_into()
            .map_err(|_| usage("--ratios takes exactly three values"))?;
        let parts = split_dataset(&plots, ratios, spec.seed)?;
        let mut bytes = Vec::new();
        write_splits(&parts.concat(), &mut bytes)?;
        files::emit(Some(&path), &bytes)?;
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct StatsArgs {
    #[command(flatten)]
    data: DataArgs,
}

#[derive(Debug, Serialize)]
struct DatasetStats {
    n_stimuli: usize,
    mean_agreement: f64,
    strata: Vec<CountStratum>,
}

#[derive(Debug, Serialize)]
struct CountStratum {
    count: usize,
    n_stimuli: usize,
    mean_agreement: f64,
}

#[derive(Serialize)]
struct CsvRow {
    count: String,
    n_stimuli: usize,
    mean_agreement: f64,
}

pub fn dataset_stats(shared: &Shared, args: StatsArgs) -> Result<()> {
    let plots = args.data.load()?;
    if plots.is_empty() {
        return Err(data("empty dataset"));
    }
    let mut by_count: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    let mut all = Vec::with_capacity(plots.len());
    for plot in &plots {
        if plot.group.is_empty() {
            return Err(data(format!("stimulus '{}' has no annotations", plot.id())));
        }
        let a = mean_agreement(&plot.group.label_sets()).with_context(|| format!("stimulus '{}'", plot.id()))?;
        by_count.entry(round_count(consensus_cluster_count(&plot.group))).or_default().push(a);
        all.push(a);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let stats = DatasetStats {
        n_stimuli: all.len(),
        mean_agreement: mean(&all),
        strata: by_count
            .iter()
            .map(|(&count, v)| CountStratum {
                count,
                n_stimuli: v.len(),
                mean_agreement: mean(v),
            })
            .collect(),
    };

    let json = files::pretty_json(&stats)?;
    match &shared.out {
        None => files::emit(None, &json),
        Some(out) => {
            files::emit(Some(out), &json)?;
            let rows = stats
                .strata
                .iter()
                .map(|s| CsvRow {
                    count: s.count.to_string(),
                    n_stimuli: s.n_stimuli,
                    mean_agreement: s.mean_agreement,
                })
                .chain(std::iter::once(CsvRow {
                    count: "all".into(),
                    n_stimuli: stats.n_stimuli,
                    mean_agreement: stats.mean_agreement,
                }));
            files::emit(Some(&files::csv_sibling(out)), &files::csv_bytes(rows)?)
        }
    }
}
