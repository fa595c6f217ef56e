//! Training and fine-tuning.
//!
//! Every random choice during a step is derived from `(seed, step, slot)`,
//! and epoch order from `(seed, epoch)`, so a run resumed from a saved
//! [`TrainState`] continues exactly as if it had never stopped.

mod augment;
mod state;

pub use augment::{apply_augment, augment, wrap, AugmentConfig, AugmentDraw};
pub use state::TrainState;

use std::path::PathBuf;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::autodiff::{Adam, AdamConfig, PlateauScheduler, Tape};
use crate::data::{filter_by_agreement, AnnotatedPlot, Point2};
use crate::error::{Error, Result};
use crate::loss::{record_total, LossBreakdown};
use crate::metrics::group_agreement;
use crate::model::{record_forward, Mode, ModelConfig, ModelParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    /// Weight of different-cluster pairs in the pairwise loss.
    pub negative_momentum: f64,
    /// Plots whose mean rater agreement falls below this are dropped.
    pub agreement_threshold: f64,
    pub max_steps: usize,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub augment: AugmentConfig,
    pub seed: u64,
    pub model: ModelConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 32,
            negative_momentum: 50.0,
            agreement_threshold: 0.7,
            max_steps: 37_000,
            plateau_patience: 50,
            plateau_factor: 10.0,
            augment: AugmentConfig::default(),
            seed: 0,
            model: ModelConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("learning_rate", self.learning_rate),
            ("negative_momentum", self.negative_momentum),
            ("plateau_factor", self.plateau_factor),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if self.plateau_patience == 0 {
            return Err(Error::Config("plateau_patience must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.agreement_threshold) {
            return Err(Error::Config(format!(
                "agreement_threshold must lie in [0, 1], got {}",
                self.agreement_threshold
            )));
        }
        self.model.validate()
    }
}

/// Continued training of an existing model at a low learning rate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub steps: usize,
    pub negative_momentum: f64,
    pub base_checkpoint: PathBuf,
    pub batch_size: usize,
    pub agreement_threshold: f64,
    pub plateau_patience: usize,
    pub plateau_factor: f64,
    pub augment: AugmentConfig,
    pub seed: u64,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-7,
            steps: 8_000,
            negative_momentum: 0.1,
            base_checkpoint: PathBuf::new(),
            batch_size: 32,
            agreement_threshold: 0.7,
            plateau_patience: 50,
            plateau_factor: 10.0,
            augment: AugmentConfig::default(),
            seed: 0,
        }
    }
}

impl FinetuneConfig {
    /// The equivalent training configuration for a base model.
    pub fn as_train_config(&self, model: ModelConfig) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            negative_momentum: self.negative_momentum,
            agreement_threshold: self.agreement_threshold,
            max_steps: self.steps,
            plateau_patience: self.plateau_patience,
            plateau_factor: self.plateau_factor,
            augment: self.augment,
            seed: self.seed,
            model,
        }
    }
}

/// One rater's labelling of one stimulus, with the stimulus-wide agreement
/// target.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSample {
    pub plot_id: String,
    pub points: Vec<Point2>,
    pub labels: Vec<u32>,
    pub agreement: Vec<f64>,
}

/// Filters by agreement, then emits one sample per (plot, rater).
pub fn build_samples(plots: &[AnnotatedPlot], agreement_threshold: f64) -> Result<Vec<TrainSample>> {
    let kept = filter_by_agreement(plots, agreement_threshold)?;
    let mut out = Vec::new();
    for plot in &kept {
        let agreement = group_agreement(&plot.group.label_sets())
            .map_err(|e| Error::Data(format!("plot {}: {e}", plot.id())))?;
        for ann in &plot.group.annotations {
            out.push(TrainSample {
                plot_id: plot.id().to_string(),
                points: plot.pointset.points.clone(),
                labels: ann.labels.clone(),
                agreement: agreement.clone(),
            });
        }
    }
    Ok(out)
}

/// Brings a sample to exactly `n` points: a sorted random subset when it
/// has more, every point plus random repeats when it has fewer.
pub fn resample<R: Rng>(sample: &TrainSample, n: usize, rng: &mut R) -> TrainSample {
    let have = sample.points.len();
    let picks: Vec<usize> = if have == n {
        return sample.clone();
    } else if have > n {
        let mut v = index::sample(rng, have, n).into_vec();
        v.sort_unstable();
        v
    } else {
        let mut v: Vec<usize> = (0..have).collect();
        v.extend((have..n).map(|_| rng.random_range(0..have)));
        v
    };
    TrainSample {
        plot_id: sample.plot_id.clone(),
        points: picks.iter().map(|&i| sample.points[i]).collect(),
        labels: picks.iter().map(|&i| sample.labels[i]).collect(),
        agreement: picks.iter().map(|&i| sample.agreement[i]).collect(),
    }
}

/// Mixes several words into one well-spread seed.
pub(crate) fn derive_seed(parts: &[u64]) -> u64 {
    let mut h: u64 = 0x9E37_79B9_7F4A_7C15;
    for &p in parts {
        h ^= p.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(h << 6).wrapping_add(h >> 2);
        h = splitmix(h);
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const VALIDATION_STREAM: u64 = u64::MAX;

/// Loss and gradients of one sample under the given forward mode.
pub fn sample_loss(
    sample: &TrainSample,
    params: &ModelParams,
    config: &ModelConfig,
    negative_momentum: f64,
    mode: Mode,
    with_grads: bool,
) -> Result<(LossBreakdown, Option<Vec<Vec<f64>>>)> {
    let mut tape = Tape::new();
    let vars = params.attach(&mut tape, with_grads);
    let out = record_forward(&mut tape, &sample.points, &vars, config, mode)?;
    let loss = record_total(
        &mut tape,
        out.cluster_probs,
        out.noise_prob,
        out.agreement,
        &sample.labels,
        &sample.agreement,
        negative_momentum,
    )?;
    let breakdown = loss.breakdown(&tape);
    if !with_grads {
        return Ok((breakdown, None));
    }
    let mut grads = tape.backward(loss.total)?;
    let g = vars
        .iter()
        .zip(&params.tensors)
        .map(|(&v, t)| grads.take_or_zeros(v, t.len()))
        .collect();
    Ok((breakdown, Some(g)))
}

/// One line of the per-step training log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLog {
    pub step: usize,
    pub mcl: f64,
    pub noise: f64,
    pub agree: f64,
    pub total: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub step: usize,
    pub val_loss: f64,
    pub lr: f64,
}

/// Progress notifications from [`Trainer::run_until`].
#[derive(Debug, Clone, Copy)]
pub enum Event {
    Step(StepLog),
    Epoch(EpochLog),
}

pub struct Trainer {
    pub config: TrainConfig,
    train: Vec<TrainSample>,
    val: Vec<TrainSample>,
    pub state: TrainState,
}

impl Trainer {
    /// Fresh run from randomly initialised parameters.
    pub fn new(config: TrainConfig, train: &[AnnotatedPlot], val: &[AnnotatedPlot]) -> Result<Self> {
        config.validate()?;
        let params = ModelParams::init(&config.model, config.seed)?;
        Self::from_params(config, params, train, val)
    }

    /// Fresh optimizer state on top of existing parameters.
    pub fn from_params(
        config: TrainConfig,
        params: ModelParams,
        train: &[AnnotatedPlot],
        val: &[AnnotatedPlot],
    ) -> Result<Self> {
        config.validate()?;
        params.check_against(&config.model)?;
        let adam = Adam::new(
            AdamConfig {
                lr: config.learning_rate,
                ..Default::default()
            },
            &params.tensors,
        );
        let scheduler = PlateauScheduler::new(config.learning_rate, config.plateau_patience, config.plateau_factor);
        let state = TrainState {
            step: 0,
            params: params.clone(),
            adam,
            scheduler,
            best_params: params,
            best_val: None,
        };
        Self::resume(config, state, train, val)
    }

    /// Continues from a saved state.
    pub fn resume(config: TrainConfig, state: TrainState, train: &[AnnotatedPlot], val: &[AnnotatedPlot]) -> Result<Self> {
        config.validate()?;
        state.params.check_against(&config.model)?;
        let train = build_samples(train, config.agreement_threshold)?;
        let val = build_samples(val, config.agreement_threshold)?;
        if train.is_empty() {
            return Err(Error::Data("no training samples remain after filtering".into()));
        }
        if val.is_empty() {
            return Err(Error::Data("no validation samples remain after filtering".into()));
        }
        Ok(Self {
            config,
            train,
            val,
            state,
        })
    }

    pub fn train_samples(&self) -> &[TrainSample] {
        &self.train
    }

    pub fn steps_per_epoch(&self) -> usize {
        self.train.len().div_ceil(self.config.batch_size)
    }

    fn batch_for(&self, step: usize) -> Vec<usize> {
        let spe = self.steps_per_epoch();
        let (epoch, pos) = (step / spe, step % spe);
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(&[self.config.seed, 1, epoch as u64])));
        let b = self.config.batch_size;
        order[pos * b..((pos + 1) * b).min(order.len())].to_vec()
    }

    /// Mean total loss over the validation samples: no augmentation and
    /// FPS from index 0.
    pub fn validation_loss(&self, params: &ModelParams) -> Result<f64> {
        let model = &self.config.model;
        let losses: Vec<f64> = self
            .val
            .par_iter()
            .enumerate()
            .map(|(i, s)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[self.config.seed, VALIDATION_STREAM, i as u64]));
                let s = resample(s, model.train_points, &mut rng);
                let (b, _) = sample_loss(&s, params, model, self.config.negative_momentum, Mode::Train { fps_start: 0 }, false)?;
                Ok(b.total)
            })
            .collect::<Result<_>>()?;
        Ok(losses.iter().sum::<f64>() / losses.len() as f64)
    }

    /// Loss breakdown and mean gradient for one step's batch.
    fn step_gradients(&self, step: usize) -> Result<(LossBreakdown, Vec<Vec<f64>>)> {
        let batch = self.batch_for(step);
        let cfg = &self.config;
        let model = &cfg.model;
        let results: Vec<(LossBreakdown, Vec<Vec<f64>>)> = batch
            .par_iter()
            .enumerate()
            .map(|(slot, &idx)| {
                let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(&[cfg.seed, 2, step as u64, slot as u64]));
                let s = resample(&self.train[idx], model.train_points, &mut rng);
                let draw = AugmentDraw::sample(&cfg.augment, &mut rng);
                let s = apply_augment(&s, &draw)?;
                let fps_start = rng.random_range(0..model.train_points);
                let (b, g) = sample_loss(&s, &self.state.params, model, cfg.negative_momentum, Mode::Train { fps_start }, true)?;
                Ok((b, g.expect("gradients requested")))
            })
            .collect::<Result<_>>()?;

        let scale = 1.0 / results.len() as f64;
        let mut grads: Vec<Vec<f64>> = self.state.params.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        let (mut mcl, mut noise, mut agree) = (0.0, 0.0, 0.0);
        for (b, g) in &results {
            mcl += b.mcl;
            noise += b.noise;
            agree += b.agree;
            for (acc, gi) in grads.iter_mut().zip(g) {
                for (a, x) in acc.iter_mut().zip(gi) {
                    *a += x;
                }
            }
        }
        for acc in &mut grads {
            for a in acc.iter_mut() {
                *a *= scale;
            }
        }
        Ok((LossBreakdown::new(mcl * scale, noise * scale, agree * scale), grads))
    }

    /// Runs until `stop` steps have completed in total (capped at
    /// `max_steps`), reporting progress through `on_event`.
    pub fn run_until(&mut self, stop: usize, mut on_event: impl FnMut(Event) -> Result<()>) -> Result<()> {
        let stop = stop.min(self.config.max_steps);
        let spe = self.steps_per_epoch();
        while self.state.step < stop {
            let step = self.state.step;
            let lr = self.state.adam.lr();
            let (loss, grads) = self.step_gradients(step)?;
            if !loss.total.is_finite() {
                return Err(Error::Numeric(format!("non-finite loss at step {}", step + 1)));
            }
            self.state
                .adam
                .step(&mut self.state.params.tensors, &grads)
                .map_err(|e| Error::Numeric(format!("step {}: {e}", step + 1)))?;
            self.state.step += 1;
            on_event(Event::Step(StepLog {
                step: step + 1,
                mcl: loss.mcl,
                noise: loss.noise,
                agree: loss.agree,
                total: loss.total,
                lr,
            }))?;
            let epoch_end = (step + 1).is_multiple_of(spe);
            if epoch_end {
                let val = self.validation_loss(&self.state.params)?;
                self.observe_validation(val);
                let lr = self.state.scheduler.step(val);
                self.state.adam.set_lr(lr);
                on_event(Event::Epoch(EpochLog {
                    epoch: (step + 1) / spe,
                    step: step + 1,
                    val_loss: val,
                    lr,
                }))?;
            } else if self.state.step == self.config.max_steps {
                // A trailing partial epoch still competes for best parameters,
                // but does not feed the scheduler.
                let val = self.validation_loss(&self.state.params)?;
                self.observe_validation(val);
            }
        }
        Ok(())
    }

    fn observe_validation(&mut self, val: f64) {
        if self.state.best_val.is_none_or(|b| val < b) {
            self.state.best_val = Some(val);
            self.state.best_params = self.state.params.clone();
        }
    }

    pub fn run(&mut self, on_event: impl FnMut(Event) -> Result<()>) -> Result<()> {
        self.run_until(self.config.max_steps, on_event)
    }

    /// Parameters with the lowest validation loss seen so far, or the
    /// current ones if validation has not run yet.
    pub fn best_params(&self) -> &ModelParams {
        if self.state.best_val.is_some() {
            &self.state.best_params
        } else {
            &self.state.params
        }
    }
}

/// Everything a finished run produces.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub best_params: ModelParams,
    pub final_params: ModelParams,
    pub best_val: Option<f64>,
    pub steps: Vec<StepLog>,
    pub epochs: Vec<EpochLog>,
}

fn collect_run(mut trainer: Trainer) -> Result<TrainOutcome> {
    let mut steps = Vec::new();
    let mut epochs = Vec::new();
    trainer.run(|e| {
        match e {
            Event::Step(s) => steps.push(s),
            Event::Epoch(ep) => epochs.push(ep),
        }
        Ok(())
    })?;
    Ok(TrainOutcome {
        best_params: trainer.best_params().clone(),
        final_params: trainer.state.params,
        best_val: trainer.state.best_val,
        steps,
        epochs,
    })
}

/// Full training run from scratch.
pub fn train(config: &TrainConfig, train: &[AnnotatedPlot], val: &[AnnotatedPlot]) -> Result<TrainOutcome> {
    collect_run(Trainer::new(config.clone(), train, val)?)
}

/// Continues training `base` with a fresh optimizer. `base_lr`, when known,
/// must exceed the fine-tuning rate.
pub fn finetune(
    config: &FinetuneConfig,
    base: &ModelParams,
    model: &ModelConfig,
    base_lr: Option<f64>,
    train: &[AnnotatedPlot],
    val: &[AnnotatedPlot],
) -> Result<TrainOutcome> {
    if let Some(lr) = base_lr {
        if config.learning_rate >= lr {
            return Err(Error::Config(format!(
                "fine-tuning rate {} must be below the base run's {lr}",
                config.learning_rate
            )));
        }
    }
    let tc = config.as_train_config(model.clone());
    collect_run(Trainer::from_params(tc, base.clone(), train, val)?)
}
