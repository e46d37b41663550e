//! One trainer for both model families: seeded shuffling, mini-batch Adam,
//! per-epoch history, and optional adversarial training where part of every
//! batch is regenerated by PGD against the current parameters.
//!
//! Standard and adversarial training share this code path; with ε^train = 0
//! the PGD step is an exact identity, so the trajectories are bit-identical.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::attack::{pgd, AttackConfig, AttackKind};
use crate::classifier::Trainable;
use crate::data::Dataset;
use crate::encoding::PixelVector;
use crate::error::{Error, Result};
use crate::optim::{AdamParams, AdamState};

/// Adversarial-training knobs: ε^train, PGD step count, and the fraction of
/// each batch replaced with adversarial examples.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdvTrainConfig {
    pub epsilon: f64,
    pub steps: usize,
    pub mix: f64,
}

impl AdvTrainConfig {
    /// 3-step PGD on half of every batch.
    pub fn new(epsilon: f64) -> Self {
        AdvTrainConfig { epsilon, steps: 3, mix: 0.5 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!("epsilon {} outside [0, 1]", self.epsilon)));
        }
        if !(0.0..=1.0).contains(&self.mix) {
            return Err(Error::Config(format!("adversarial mix {} outside [0, 1]", self.mix)));
        }
        if self.steps == 0 {
            return Err(Error::Config("adversarial training needs at least one PGD step".into()));
        }
        Ok(())
    }

    fn attack_config(&self) -> AttackConfig {
        AttackConfig {
            kind: AttackKind::Pgd,
            epsilon: self.epsilon,
            steps: self.steps,
            step_size: if self.epsilon > 0.0 { 2.5 * self.epsilon / self.steps as f64 } else { 0.0 },
            random_start: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamParams,
    pub seed: u64,
    pub adversarial: Option<AdvTrainConfig>,
}

impl TrainConfig {
    pub fn new(epochs: usize, batch_size: usize, seed: u64) -> Self {
        TrainConfig { epochs, batch_size, adam: AdamParams::default(), seed, adversarial: None }
    }

    pub fn with_adversarial(mut self, adv: AdvTrainConfig) -> Self {
        self.adversarial = Some(adv);
        self
    }
}

/// One history row; `test_acc` is absent when no held-out set was given.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub test_acc: Option<f64>,
}

pub type History = Vec<EpochStats>;

/// Train in place; returns per-epoch history. Fails with a training error on
/// divergence (non-finite loss), leaving the model as-is at that point.
pub fn train<M: Trainable>(
    model: &mut M,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
    cfg: &TrainConfig,
) -> Result<History> {
    if train_set.is_empty() {
        return Err(Error::DegenerateInput("cannot train on an empty dataset".into()));
    }
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch size must be positive".into()));
    }
    if let Some(adv) = &cfg.adversarial {
        adv.validate()?;
    }
    let mut adam = AdamState::new(model.params().len(), cfg.adam);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order: Vec<usize> = (0..train_set.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(epoch as u64);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut images: Vec<PixelVector> =
                batch.iter().map(|&i| train_set.images[i].clone()).collect();
            let labels: Vec<usize> = batch.iter().map(|&i| train_set.labels[i]).collect();
            if let Some(adv) = &cfg.adversarial {
                let n_adv = (images.len() as f64 * adv.mix).round() as usize;
                let attack_cfg = adv.attack_config();
                let adversarial: Vec<PixelVector> = images[..n_adv]
                    .par_iter()
                    .zip(labels[..n_adv].par_iter())
                    .map(|(x, &y)| {
                        // PGD here never uses a random start; the RNG is
                        // only a signature requirement.
                        let mut unused = ChaCha8Rng::seed_from_u64(cfg.seed);
                        Ok(pgd(&*model, x, y, &attack_cfg, &mut unused)?.perturbed)
                    })
                    .collect::<Result<_>>()?;
                for (slot, adv_x) in images[..n_adv].iter_mut().zip(adversarial) {
                    *slot = adv_x;
                }
            }
            let (loss, grads) = model.batch_loss_and_grads(&images, &labels)?;
            if !loss.is_finite() || grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::Training(format!(
                    "diverged in epoch {epoch}: loss {loss}, non-finite gradients {} \
                     (lr {}, batch of {})",
                    grads.iter().filter(|g| !g.is_finite()).count(),
                    cfg.adam.lr,
                    images.len()
                )));
            }
            adam.step(model.params_mut(), &grads)?;
            loss_sum += loss * images.len() as f64;
        }

        let train_acc = train_set.accuracy(&*model)?;
        let test_acc = match test_set {
            Some(ds) => Some(ds.accuracy(&*model)?),
            None => None,
        };
        history.push(EpochStats {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc,
            test_acc,
        });
    }
    Ok(history)
}
