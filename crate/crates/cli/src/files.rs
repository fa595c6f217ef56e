//! Shared file handling and error classification.

use std::collections::HashMap;
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use percluster::data::{load_dataset, load_splits, AnnotatedPlot, Split};
use percluster::Error;
use serde::de::DeserializeOwned;
use serde::Serialize;

pub fn usage(message: impl Into<String>) -> anyhow::Error {
    Error::Config(message.into()).into()
}

pub fn data(message: impl Into<String>) -> anyhow::Error {
    Error::Data(message.into()).into()
}

/// 1 for usage and configuration problems, 3 for numeric failures, 2 for
/// everything else that went wrong with the inputs.
pub fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Error>() {
            return match e {
                Error::Config(_) => 1,
                Error::Numeric(_) => 3,
                _ => 2,
            };
        }
    }
    2
}

/// Parses a JSON config, or returns the defaults when no path is given.
pub fn read_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else {
        return Ok(T::default());
    };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid config {}: {e}", path.display())))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| usage(format!("invalid JSON in {}: {e}", path.display())))
}

/// Dataset input plus an optional split selection.
#[derive(Args, Debug, Clone)]
pub struct DataArgs {
    /// Annotated dataset in JSON Lines.
    #[arg(long)]
    pub data: PathBuf,

    /// JSON Lines file of {"id", "split"} records.
    #[arg(long)]
    pub splits: Option<PathBuf>,

    /// Keep only plots of this split (train, val or test); needs --splits.
    #[arg(long)]
    pub split: Option<Split>,
}

impl DataArgs {
    pub fn load(&self) -> Result<Vec<AnnotatedPlot>> {
        let plots = load_plots(&self.data, self.splits.as_deref())?;
        match self.split {
            None => Ok(plots),
            Some(_) if self.splits.is_none() => Err(usage("--split needs --splits")),
            Some(split) => Ok(plots.into_iter().filter(|p| p.split == Some(split)).collect()),
        }
    }
}

/// Loads a dataset and tags each plot with its split from `splits`, if given.
pub fn load_plots(data: &Path, splits: Option<&Path>) -> Result<Vec<AnnotatedPlot>> {
    let mut plots = load_dataset(data).with_context(|| format!("reading dataset {}", data.display()))?;
    if let Some(path) = splits {
        let map: HashMap<String, Split> =
            load_splits(path).with_context(|| format!("reading splits {}", path.display()))?;
        for plot in &mut plots {
            plot.split = map.get(plot.id()).copied();
        }
    }
    Ok(plots)
}

pub fn require_out(shared_out: Option<&Path>, what: &str) -> Result<PathBuf> {
    shared_out
        .map(Path::to_path_buf)
        .ok_or_else(|| usage(format!("--out is required for {what}")))
}

pub fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

/// Writes `bytes` to `path`, or to stdout without one.
pub fn emit(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => {
            let mut w = create(p)?;
            w.write_all(bytes)?;
            w.flush()?;
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(bytes)?;
            stdout.flush()?;
        }
    }
    Ok(())
}

pub fn pretty_json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

pub fn jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<Vec<u8>> {
    let mut bytes = Vec::new();
    for item in items {
        serde_json::to_writer(&mut bytes, &item)?;
        bytes.push(b'\n');
    }
    Ok(bytes)
}

/// The CSV companion of a JSON output path.
pub fn csv_sibling(path: &Path) -> PathBuf {
    path.with_extension("csv")
}

pub fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}
