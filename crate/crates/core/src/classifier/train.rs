use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{normalize_input, ClassifierModel, LossKind};
use crate::datasetgen::{AberrationLabel, DatasetManifest};
use crate::error::{Error, Result};
use crate::export::read_psf;

/// Intensity floor added before taking logs of a unit-sum PSF.
pub const LOG_FLOOR: f64 = 1e-6;

/// Classifier input for a PSF: log intensity, then zero mean and unit
/// variance. Raw PSFs are near-delta spikes whose tails carry the label.
pub fn psf_input(values: &[f64]) -> Vec<f64> {
    let logs: Vec<f64> = values
        .iter()
        .map(|&v| (v.max(0.0) + LOG_FLOOR).ln())
        .collect();
    normalize_input(&logs)
}

/// One normalized classifier input with its label. `key` fixes the
/// canonical order before shuffling (the record's item seed).
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub label: AberrationLabel,
    pub key: u64,
}

/// Loads every record's PSF as a [`psf_input`], resolving paths against `dir`.
pub fn load_samples(manifest: &DatasetManifest, dir: &Path) -> Result<Vec<Sample>> {
    manifest
        .records
        .iter()
        .map(|r| {
            let psf = read_psf(&dir.join(&r.path))?;
            Ok(Sample {
                input: psf_input(&psf.values),
                label: r.label,
                key: r.item_seed,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub decay: f64,
    pub decay_every: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub loss: LossKind,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 100,
            batch_size: 32,
            learning_rate: 1e-3,
            decay: 0.9,
            decay_every: 20,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            loss: LossKind::CrossEntropy,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("train config: {what}")));
        if self.epochs == 0 || self.batch_size == 0 || self.decay_every == 0 {
            return bad("epochs, batch_size and decay_every must be positive");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return bad("decay must lie in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.beta1)
            || !(0.0..1.0).contains(&self.beta2)
            || self.adam_eps <= 0.0
        {
            return bad("Adam betas must lie in [0, 1) and eps must be positive");
        }
        Ok(())
    }

    /// Step decay: `lr * decay^(epoch / decay_every)`, epochs counted from 0.
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        self.learning_rate * self.decay.powi((epoch / self.decay_every) as i32)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub learning_rate: f64,
    pub loss: f64,
}

pub const LOSS_CSV_HEADER: &str = "epoch,learning_rate,loss";

pub fn loss_log_csv(log: &[EpochLog]) -> String {
    let mut s = String::from(LOSS_CSV_HEADER);
    s.push('\n');
    for e in log {
        s += &format!("{},{},{:.10}\n", e.epoch, e.learning_rate, e.loss);
    }
    s
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64, cfg: &TrainConfig) {
        self.t += 1;
        let c1 = 1.0 - cfg.beta1.powi(self.t);
        let c2 = 1.0 - cfg.beta2.powi(self.t);
        for ((p, &g), (m, v)) in params
            .iter_mut()
            .zip(grad)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
            *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + cfg.adam_eps);
        }
    }
}

/// Mini-batch Adam training with a per-epoch shuffle seeded by `cfg.seed`.
/// Samples are first put in canonical key order, so the result does not
/// depend on the order they were supplied in.
pub fn train(
    model: &mut ClassifierModel,
    samples: &[Sample],
    cfg: &TrainConfig,
) -> Result<Vec<EpochLog>> {
    train_with(model, samples, cfg, |_| {})
}

/// [`train`] with a callback after every epoch.
pub fn train_with(
    model: &mut ClassifierModel,
    samples: &[Sample],
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    cfg.validate()?;
    if samples.is_empty() {
        return Err(Error::InvalidArgument("no training samples".into()));
    }
    let mut canonical: Vec<&Sample> = samples.iter().collect();
    canonical.sort_by_key(|s| s.key);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut adam = Adam::new(model.param_count());
    let mut order: Vec<usize> = (0..canonical.len()).collect();
    let mut log = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.sort_unstable();
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (b, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&[f64], [usize; 3])> = chunk
                .iter()
                .map(|&i| {
                    (
                        canonical[i].input.as_slice(),
                        canonical[i].label.class_indices(),
                    )
                })
                .collect();
            let (loss, grad) = model.loss_and_grad(&batch, cfg.loss)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(Error::Numeric(format!(
                    "non-finite loss {loss} at epoch {epoch}, batch {b} (lr {lr}); last finite epoch loss {:?}",
                    log.last().map(|e: &EpochLog| e.loss)
                )));
            }
            adam.step(model.params_mut(), &grad, lr, cfg);
            total += loss * chunk.len() as f64;
        }
        let entry = EpochLog {
            epoch,
            learning_rate: lr,
            loss: total / canonical.len() as f64,
        };
        on_epoch(&entry);
        log.push(entry);
    }
    Ok(log)
}
