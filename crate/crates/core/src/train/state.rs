use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, PlateauScheduler, Tensor};
use crate::error::{Error, Result};
use crate::model::{Checkpoint, ModelConfig, ModelParams};

/// Everything needed to continue a run bit-exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    /// Completed optimizer steps.
    pub step: usize,
    pub params: ModelParams,
    pub adam: Adam,
    pub scheduler: PlateauScheduler,
    pub best_params: ModelParams,
    pub best_val: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct StateExtra {
    step: usize,
    adam_step: u64,
    adam_config: AdamConfig,
    scheduler: PlateauScheduler,
    best_val: Option<f64>,
}

impl TrainState {
    pub fn to_checkpoint(&self, config: &ModelConfig) -> Result<Checkpoint> {
        let mut ck = Checkpoint::new(config.clone(), self.params.clone());
        let names = &self.params.names;
        for (prefix, blocks) in [("adam.m", &self.adam.m), ("adam.v", &self.adam.v)] {
            for (name, (data, t)) in names.iter().zip(blocks.iter().zip(&self.params.tensors)) {
                ck.aux.push((format!("{prefix}.{name}"), Tensor::new(t.shape.clone(), data.clone())?));
            }
        }
        for (name, t) in names.iter().zip(&self.best_params.tensors) {
            ck.aux.push((format!("best.{name}"), t.clone()));
        }
        ck.extra = serde_json::json!({
            "train_state": StateExtra {
                step: self.step,
                adam_step: self.adam.step,
                adam_config: self.adam.config,
                scheduler: self.scheduler.clone(),
                best_val: self.best_val,
            }
        });
        Ok(ck)
    }

    pub fn from_checkpoint(ck: Checkpoint) -> Result<Self> {
        let extra: StateExtra = ck
            .extra
            .get("train_state")
            .cloned()
            .ok_or_else(|| Error::Checkpoint("checkpoint holds no training state".into()))
            .and_then(|v| serde_json::from_value(v).map_err(|e| Error::Checkpoint(format!("bad training state: {e}"))))?;
        let k = ck.params.tensors.len();
        if ck.aux.len() != 3 * k {
            return Err(Error::Checkpoint(format!(
                "expected {} optimizer and best-parameter blocks, found {}",
                3 * k,
                ck.aux.len()
            )));
        }
        let mut aux = ck.aux.into_iter();
        let mut take_group = |prefix: &str| -> Result<Vec<Tensor>> {
            ck.params
                .names
                .iter()
                .map(|name| {
                    let (n, t) = aux.next().expect("length checked");
                    if n != format!("{prefix}.{name}") {
                        return Err(Error::Checkpoint(format!("unexpected block {n}")));
                    }
                    Ok(t)
                })
                .collect()
        };
        let m = take_group("adam.m")?;
        let v = take_group("adam.v")?;
        let best = take_group("best")?;
        let best_params = ModelParams {
            names: ck.params.names.clone(),
            tensors: best,
        };
        best_params.check_against(&ck.config)?;
        Ok(Self {
            step: extra.step,
            params: ck.params,
            adam: Adam {
                config: extra.adam_config,
                step: extra.adam_step,
                m: m.into_iter().map(|t| t.data).collect(),
                v: v.into_iter().map(|t| t.data).collect(),
            },
            scheduler: extra.scheduler,
            best_params,
            best_val: extra.best_val,
        })
    }

    pub fn save(&self, config: &ModelConfig, path: &Path) -> Result<()> {
        self.to_checkpoint(config)?.save(path)
    }

    /// Returns the state and the model config it was saved with.
    pub fn load(path: &Path) -> Result<(Self, ModelConfig)> {
        let ck = Checkpoint::load(path)?;
        let config = ck.config.clone();
        Ok((Self::from_checkpoint(ck)?, config))
    }
}
