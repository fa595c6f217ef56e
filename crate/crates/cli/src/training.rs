use std::fs::OpenOptions;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use percluster::data::{split_dataset, write_splits, AnnotatedPlot, Split};
use percluster::model::Checkpoint;
use percluster::train::{Event, FinetuneConfig, TrainConfig, TrainState, Trainer};
use serde_json::json;

use crate::files::{self, usage};
use crate::Shared;

#[derive(Args, Debug)]
pub struct RunData {
    /// Annotated dataset in JSON Lines.
    #[arg(long)]
    data: PathBuf,

    /// Split assignments; without it the dataset is split by seed and the
    /// assignment is written to the run directory.
    #[arg(long)]
    splits: Option<PathBuf>,

    /// Train, val and test fractions used when --splits is absent.
    #[arg(long, value_delimiter = ',', default_values_t = [0.8, 0.1, 0.1])]
    ratios: Vec<f64>,
}

impl RunData {
    /// Train and validation plots, recording the full assignment in `dir`.
    fn load(&self, seed: u64, dir: &Path) -> Result<(Vec<AnnotatedPlot>, Vec<AnnotatedPlot>)> {
        let mut plots = files::load_plots(&self.data, self.splits.as_deref())?;
        if self.splits.is_none() {
            let ratios: [f64; 3] = self
                .ratios
                .clone()
                .try_into()
                .map_err(|_| usage("--ratios takes exactly three values"))?;
            plots = split_dataset(&plots, ratios, seed)?.concat();
        }
        let mut bytes = Vec::new();
        write_splits(&plots, &mut bytes)?;
        files::emit(Some(&dir.join("splits.jsonl")), &bytes)?;
        let pick = |s: Split| plots.iter().filter(|p| p.split == Some(s)).cloned().collect::<Vec<_>>();
        Ok((pick(Split::Train), pick(Split::Val)))
    }
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    data: RunData,

    /// Continue from a saved training state; logs are appended.
    #[arg(long)]
    resume: Option<PathBuf>,
}

pub fn train(shared: &Shared, args: TrainArgs) -> Result<()> {
    let mut config: TrainConfig = files::read_config(shared.config.as_deref())?;
    if let Some(seed) = shared.seed {
        config.seed = seed;
    }
    config.validate()?;
    let dir = files::require_out(shared.out.as_deref(), "train")?;
    let (train, val) = args.data.load(config.seed, &dir)?;
    files::emit(Some(&dir.join("config.json")), &files::pretty_json(&config)?)?;

    let trainer = match &args.resume {
        None => Trainer::new(config, &train, &val)?,
        Some(path) => {
            let (state, model) = TrainState::load(path).with_context(|| format!("loading {}", path.display()))?;
            if model != config.model {
                return Err(usage(format!("{} was trained with a different model config", path.display())));
            }
            Trainer::resume(config, state, &train, &val)?
        }
    };
    run(trainer, &dir, args.resume.is_some())
}

#[derive(Args, Debug)]
pub struct FinetuneArgs {
    #[command(flatten)]
    data: RunData,

    /// Base checkpoint; overrides `base_checkpoint` from the config.
    #[arg(long)]
    base: Option<PathBuf>,
}

pub fn finetune(shared: &Shared, args: FinetuneArgs) -> Result<()> {
    let mut config: FinetuneConfig = files::read_config(shared.config.as_deref())?;
    if let Some(seed) = shared.seed {
        config.seed = seed;
    }
    if let Some(base) = args.base {
        config.base_checkpoint = base;
    }
    if config.base_checkpoint.as_os_str().is_empty() {
        return Err(usage("finetune needs --base or base_checkpoint in the config"));
    }
    let dir = files::require_out(shared.out.as_deref(), "finetune")?;
    let base = Checkpoint::load(&config.base_checkpoint)
        .with_context(|| format!("loading {}", config.base_checkpoint.display()))?;
    if let Some(lr) = base.extra.get("learning_rate").and_then(|v| v.as_f64()) {
        if config.learning_rate >= lr {
            return Err(usage(format!(
                "fine-tuning rate {} must be below the base run's {lr}",
                config.learning_rate
            )));
        }
    }
    let (train, val) = args.data.load(config.seed, &dir)?;
    files::emit(Some(&dir.join("config.json")), &files::pretty_json(&config)?)?;
    let trainer = Trainer::from_params(config.as_train_config(base.config), base.params, &train, &val)?;
    run(trainer, &dir, false)
}

/// Runs to completion, streaming `steps.jsonl` and `epochs.jsonl`, then
/// writes `state.ckpt` (resumable) and `model.ckpt` (best parameters).
fn run(mut trainer: Trainer, dir: &Path, append: bool) -> Result<()> {
    let open = |name: &str| -> Result<BufWriter<std::fs::File>> {
        let path = dir.join(name);
        let file = OpenOptions::new()
            .create(true)
            .write(true)
            .append(append)
            .truncate(!append)
            .open(&path)
            .with_context(|| format!("opening {}", path.display()))?;
        Ok(BufWriter::new(file))
    };
    let mut steps = open("steps.jsonl")?;
    let mut epochs = open("epochs.jsonl")?;
    trainer.run(|event| {
        let written = match event {
            Event::Step(s) => serde_json::to_writer(&mut steps, &s).map(|()| steps.write_all(b"\n")),
            Event::Epoch(e) => serde_json::to_writer(&mut epochs, &e).map(|()| epochs.write_all(b"\n")),
        };
        written??;
        Ok(())
    })?;
    steps.flush()?;
    epochs.flush()?;

    let model = &trainer.config.model;
    trainer.state.save(model, &dir.join("state.ckpt"))?;
    let mut best = Checkpoint::new(model.clone(), trainer.best_params().clone());
    best.extra = json!({
        "learning_rate": trainer.config.learning_rate,
        "step": trainer.state.step,
        "best_val": trainer.state.best_val,
    });
    best.save(&dir.join("model.ckpt"))?;

    let summary = json!({
        "steps": trainer.state.step,
        "best_val": trainer.state.best_val,
        "lr": trainer.state.scheduler.lr,
    });
    println!("{summary}");
    Ok(())
}
