use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use percluster::data::load_dataset;
use percluster::metrics::group_agreement;
use percluster::render::render_svg;

use crate::evaluate::PredictionRecord;
use crate::files::{self, data, usage};
use crate::Shared;

#[derive(Args, Debug)]
pub struct RenderArgs {
    /// Dataset holding the plot's points.
    #[arg(long)]
    data: PathBuf,

    /// Stimulus to draw.
    #[arg(long)]
    id: String,

    /// Colour by these predictions (JSON Lines from `predict`).
    #[arg(long, conflicts_with = "rater")]
    predictions: Option<PathBuf>,

    /// Colour by this rater's annotation instead.
    #[arg(long)]
    rater: Option<String>,

    /// Map agreement to marker opacity: the predicted agreement, or the
    /// raters' agreement when drawing an annotation.
    #[arg(long)]
    agreement: bool,
}

pub fn render(shared: &Shared, args: RenderArgs) -> Result<()> {
    let plots = load_dataset(&args.data).with_context(|| format!("reading dataset {}", args.data.display()))?;
    let plot = plots
        .iter()
        .find(|p| p.id() == args.id)
        .ok_or_else(|| data(format!("no stimulus '{}' in {}", args.id, args.data.display())))?;

    let (labels, agreement) = match (&args.predictions, &args.rater) {
        (Some(path), _) => {
            let rec = find_prediction(path, &args.id)?;
            let agreement = if args.agreement {
                Some(rec.agreement.ok_or_else(|| data(format!("prediction for '{}' has no agreement", args.id)))?)
            } else {
                None
            };
            (rec.labels, agreement)
        }
        (None, Some(rater)) => {
            let ann = plot
                .group
                .annotations
                .iter()
                .find(|a| &a.rater == rater)
                .ok_or_else(|| data(format!("stimulus '{}' has no rater '{rater}'", args.id)))?;
            let agreement = if args.agreement {
                Some(group_agreement(&plot.group.label_sets())?)
            } else {
                None
            };
            (ann.labels.clone(), agreement)
        }
        (None, None) => return Err(usage("render needs --predictions or --rater")),
    };
    let svg = render_svg(&plot.pointset.points, &labels, agreement.as_deref())?;
    files::emit(shared.out.as_deref(), svg.as_bytes())
}

fn find_prediction(path: &Path, id: &str) -> Result<PredictionRecord> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord = serde_json::from_str(&line)
            .map_err(|e| data(format!("{}:{}: {e}", path.display(), idx + 1)))?;
        if rec.id == id {
            return Ok(rec);
        }
    }
    Err(data(format!("no prediction for '{id}' in {}", path.display())))
}
