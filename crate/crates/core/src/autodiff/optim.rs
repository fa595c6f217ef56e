use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{shape_err, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected Adam with one moment buffer pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig, params: &[Tensor]) -> Self {
        Self {
            config,
            step: 0,
            m: params.iter().map(|p| vec![0.0; p.len()]).collect(),
            v: params.iter().map(|p| vec![0.0; p.len()]).collect(),
        }
    }

    pub fn lr(&self) -> f64 {
        self.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    /// Applies one update. Fails without touching anything if a gradient is
    /// non-finite or shapes disagree.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.m.len() {
            return Err(shape_err(
                "adam_step",
                format!("{} params, {} grads, {} moment buffers", params.len(), grads.len(), self.m.len()),
            ));
        }
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            if p.len() != g.len() || p.len() != self.m[i].len() {
                return Err(shape_err(
                    "adam_step",
                    format!("param {i}: {} values, {} grads", p.len(), g.len()),
                ));
            }
            if g.iter().any(|x| !x.is_finite()) {
                return Err(Error::Numeric(format!("non-finite gradient in parameter {i}")));
            }
        }
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.step as i32);
        let bc2 = 1.0 - beta2.powi(self.step as i32);
        for ((p, g), (m, v)) in params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())) {
            for (((x, &gi), mi), vi) in p.data.iter_mut().zip(g).zip(m.iter_mut()).zip(v.iter_mut()) {
                *mi = beta1 * *mi + (1.0 - beta1) * gi;
                *vi = beta2 * *vi + (1.0 - beta2) * gi * gi;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                *x -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Divides the learning rate by `factor` once the monitored value has gone
/// `patience` consecutive epochs without strictly improving on its best.
///
/// The first observation only seeds the best value, so it counts as a
/// non-improving epoch. The counter resets on improvement and on decay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateauScheduler {
    pub patience: usize,
    pub factor: f64,
    pub lr: f64,
    pub best: Option<f64>,
    pub stale_epochs: usize,
    pub decays: usize,
}

impl PlateauScheduler {
    pub fn new(lr: f64, patience: usize, factor: f64) -> Self {
        Self {
            patience,
            factor,
            lr,
            best: None,
            stale_epochs: 0,
            decays: 0,
        }
    }

    /// Records one epoch's validation loss and returns the learning rate to
    /// use from now on.
    pub fn step(&mut self, value: f64) -> f64 {
        match self.best {
            Some(best) if value < best => {
                self.best = Some(value);
                self.stale_epochs = 0;
            }
            Some(_) => self.stale_epochs += 1,
            None => {
                self.best = Some(value);
                self.stale_epochs += 1;
            }
        }
        if self.stale_epochs >= self.patience {
            self.lr /= self.factor;
            self.stale_epochs = 0;
            self.decays += 1;
        }
        self.lr
    }
}
