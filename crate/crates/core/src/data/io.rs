use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{normalize_points, AnnotatedPlot, Annotation, Point2, PointSet, RaterGroup, Split};
use crate::error::{Error, Result};

/// On-disk form of one stimulus (one JSON Lines record).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlotRecord {
    pub id: String,
    pub points: Vec<[f64; 2]>,
    /// May be omitted for unlabelled inputs such as prediction requests.
    #[serde(default)]
    pub annotations: Vec<Annotation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

impl PlotRecord {
    fn into_plot(self) -> Result<AnnotatedPlot> {
        let n = self.points.len();
        for a in &self.annotations {
            if a.labels.len() != n {
                return Err(Error::Data(format!(
                    "stimulus '{}': rater '{}' has {} labels for {} points",
                    self.id,
                    a.rater,
                    a.labels.len(),
                    n
                )));
            }
        }
        let raw = PointSet::new(
            self.id,
            self.points.iter().map(|&[x, y]| Point2::new(x, y)).collect(),
        );
        Ok(AnnotatedPlot {
            pointset: normalize_points(&raw)?,
            group: RaterGroup::new(self.annotations),
            split: None,
            source: self.source,
        })
    }
}

impl From<&AnnotatedPlot> for PlotRecord {
    fn from(plot: &AnnotatedPlot) -> Self {
        PlotRecord {
            id: plot.pointset.id.clone(),
            points: plot.pointset.points.iter().map(|p| [p.x, p.y]).collect(),
            annotations: plot.group.annotations.clone(),
            source: plot.source.clone(),
        }
    }
}

/// Loads and normalizes a JSON Lines dataset. Blank lines are skipped.
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Vec<AnnotatedPlot>> {
    let path = path.as_ref();
    let file = File::open(path)?;
    read_dataset(BufReader::new(file), path)
}

pub fn read_dataset(reader: impl BufRead, origin: impl Into<PathBuf>) -> Result<Vec<AnnotatedPlot>> {
    let origin = origin.into();
    let mut plots = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PlotRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: origin.clone(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        plots.push(record.into_plot()?);
    }
    Ok(plots)
}

pub fn save_dataset(plots: &[AnnotatedPlot], mut out: impl Write) -> Result<()> {
    for plot in plots {
        serde_json::to_writer(&mut out, &PlotRecord::from(plot))?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct SplitRecord {
    id: String,
    split: Split,
}

/// Reads a `{"id": ..., "split": ...}` JSON Lines file.
pub fn load_splits(path: impl AsRef<Path>) -> Result<HashMap<String, Split>> {
    let path = path.as_ref();
    let reader = BufReader::new(File::open(path)?);
    let mut map = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: SplitRecord = serde_json::from_str(&line).map_err(|e| Error::Schema {
            path: path.to_path_buf(),
            line: idx + 1,
            message: e.to_string(),
        })?;
        map.insert(rec.id, rec.split);
    }
    Ok(map)
}

/// Writes the split of every plot that has one.
pub fn write_splits(plots: &[AnnotatedPlot], mut out: impl Write) -> Result<()> {
    for plot in plots {
        if let Some(split) = plot.split {
            let rec = SplitRecord {
                id: plot.id().to_string(),
                split,
            };
            serde_json::to_writer(&mut out, &rec)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}
