//! White-box evasion attacks in pixel space under an l∞ budget: FGSM and
//! projected gradient descent. Both work against any [`Classifier`] that can
//! report input gradients; attack sets serialize to a replayable file so a
//! second model can be evaluated on exactly the same perturbed pixels.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::Classifier;
use crate::encoding::PixelVector;
use crate::error::{Error, Result};

/// Slack added to the l∞ budget check to absorb clip/round-trip arithmetic.
pub const BUDGET_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttackKind {
    Fgsm,
    Pgd,
}

impl AttackKind {
    pub fn label(&self) -> &'static str {
        match self {
            AttackKind::Fgsm => "fgsm",
            AttackKind::Pgd => "pgd",
        }
    }
}

/// Attack hyperparameters. `steps`, `step_size`, and `random_start` only
/// matter for PGD.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttackConfig {
    pub kind: AttackKind,
    pub epsilon: f64,
    pub steps: usize,
    pub step_size: f64,
    pub random_start: bool,
}

impl AttackConfig {
    pub fn fgsm(epsilon: f64) -> Self {
        AttackConfig { kind: AttackKind::Fgsm, epsilon, steps: 1, step_size: epsilon, random_start: false }
    }

    /// PGD with the usual step size α = 2.5·ε/steps.
    pub fn pgd(epsilon: f64, steps: usize) -> Self {
        let step_size = if steps > 0 { 2.5 * epsilon / steps as f64 } else { 0.0 };
        AttackConfig { kind: AttackKind::Pgd, epsilon, steps, step_size, random_start: false }
    }

    /// Check invariants; returns advisory warnings (an undersized total step
    /// budget is legal but usually a mistake).
    pub fn validate(&self) -> Result<Vec<String>> {
        if !(0.0..=1.0).contains(&self.epsilon) {
            return Err(Error::Config(format!(
                "epsilon {} outside [0, 1] (pixel units)",
                self.epsilon
            )));
        }
        let mut warnings = Vec::new();
        if self.kind == AttackKind::Pgd {
            if self.steps == 0 {
                return Err(Error::Config("pgd needs at least one step".into()));
            }
            if self.epsilon > 0.0 && !(self.step_size > 0.0) {
                return Err(Error::Config(format!(
                    "pgd step size {} must be positive",
                    self.step_size
                )));
            }
            if (self.steps as f64) * self.step_size < self.epsilon {
                warnings.push(format!(
                    "pgd cannot reach the budget boundary: {} steps of {} < epsilon {}",
                    self.steps, self.step_size, self.epsilon
                ));
            }
        }
        Ok(warnings)
    }
}

/// One attacked image with everything needed to audit it.
#[derive(Debug, Clone)]
pub struct AdversarialExample {
    pub original: PixelVector,
    pub perturbed: PixelVector,
    pub delta: Vec<f64>,
    pub source_model: String,
    pub config: AttackConfig,
    pub label: usize,
    pub original_prediction: usize,
    pub adversarial_prediction: usize,
    /// Loss at the start point and after every gradient step.
    pub step_losses: Vec<f64>,
}

impl AdversarialExample {
    pub fn linf(&self) -> f64 {
        self.delta.iter().fold(0.0, |m, d| m.max(d.abs()))
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn finish(
    model: &dyn Classifier,
    x: &PixelVector,
    label: usize,
    config: &AttackConfig,
    original_prediction: usize,
    perturbed_values: Vec<f64>,
    step_losses: Vec<f64>,
) -> Result<AdversarialExample> {
    let perturbed = PixelVector::new(perturbed_values, x.width(), x.height())?;
    let delta: Vec<f64> = perturbed.values().iter().zip(x.values()).map(|(p, o)| p - o).collect();
    let adversarial_prediction = model.predict(&perturbed)?;
    Ok(AdversarialExample {
        original: x.clone(),
        perturbed,
        delta,
        source_model: model.model_id().to_string(),
        config: *config,
        label,
        original_prediction,
        adversarial_prediction,
        step_losses,
    })
}

/// Single-shot attack: `clip(x + ε·sign(∇_x L))` with sign(0) = 0.
pub fn fgsm(
    model: &dyn Classifier,
    x: &PixelVector,
    label: usize,
    epsilon: f64,
) -> Result<AdversarialExample> {
    let config = AttackConfig::fgsm(epsilon);
    config.validate()?;
    let original_prediction = model.predict(x)?;
    let start_loss = model.loss(x, label)?;
    let g = model.input_gradient(x, label)?;
    let perturbed: Vec<f64> = x
        .values()
        .iter()
        .zip(&g)
        .map(|(v, gi)| (v + epsilon * sign(*gi)).clamp(0.0, 1.0))
        .collect();
    let example = finish(model, x, label, &config, original_prediction, perturbed, vec![start_loss])?;
    let mut example = example;
    example.step_losses.push(model.loss(&example.perturbed, label)?);
    Ok(example)
}

/// Iterated attack: α-sized sign steps, each projected back onto the ε-ball
/// around `x` intersected with the pixel box. `rng` is only consulted for the
/// random start.
pub fn pgd(
    model: &dyn Classifier,
    x: &PixelVector,
    label: usize,
    config: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<AdversarialExample> {
    config.validate()?;
    let eps = config.epsilon;
    let original_prediction = model.predict(x)?;
    let project = |v: f64, orig: f64| v.clamp((orig - eps).max(0.0), (orig + eps).min(1.0));

    let mut current: Vec<f64> = if config.random_start && eps > 0.0 {
        x.values()
            .iter()
            .map(|v| project(v + rng.gen_range(-eps..=eps), *v))
            .collect()
    } else {
        x.values().to_vec()
    };
    let mut step_losses = Vec::with_capacity(config.steps + 1);
    for _ in 0..config.steps {
        let probe = PixelVector::new(current.clone(), x.width(), x.height())?;
        step_losses.push(model.loss(&probe, label)?);
        let g = model.input_gradient(&probe, label)?;
        for ((v, gi), orig) in current.iter_mut().zip(&g).zip(x.values()) {
            *v = project(*v + config.step_size * sign(*gi), *orig);
        }
    }
    let final_probe = PixelVector::new(current.clone(), x.width(), x.height())?;
    step_losses.push(model.loss(&final_probe, label)?);
    finish(model, x, label, config, original_prediction, current, step_losses)
}

/// Run `config` against one example, dispatching on kind.
pub fn attack(
    model: &dyn Classifier,
    x: &PixelVector,
    label: usize,
    config: &AttackConfig,
    rng: &mut ChaCha8Rng,
) -> Result<AdversarialExample> {
    match config.kind {
        AttackKind::Fgsm => fgsm(model, x, label, config.epsilon),
        AttackKind::Pgd => pgd(model, x, label, config, rng),
    }
}

/// A batch of attacked images plus the bookkeeping the harness writes out.
#[derive(Debug, Clone)]
pub struct AttackSet {
    pub source_model: String,
    pub config: AttackConfig,
    pub seed: u64,
    pub examples: Vec<AdversarialExample>,
    /// (example index, error message) for inputs that could not be attacked.
    pub failures: Vec<(usize, String)>,
    pub clean_accuracy: f64,
    pub adversarial_accuracy: f64,
}

/// Attack every (image, label) pair. Per-example randomness comes from
/// independent streams of one seeded generator, so results do not depend on
/// thread scheduling.
pub fn attack_batch(
    model: &dyn Classifier,
    images: &[PixelVector],
    labels: &[usize],
    config: &AttackConfig,
    seed: u64,
) -> Result<AttackSet> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::Config(format!(
            "attack batch of {} images with {} labels",
            images.len(),
            labels.len()
        )));
    }
    config.validate()?;
    let results: Vec<Result<AdversarialExample>> = (0..images.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            attack(model, &images[i], labels[i], config, &mut rng)
        })
        .collect();
    let mut examples = Vec::with_capacity(images.len());
    let mut failures = Vec::new();
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok(ex) => examples.push(ex),
            Err(e) => failures.push((i, e.to_string())),
        }
    }
    if examples.is_empty() {
        return Err(Error::DegenerateInput("every example in the batch failed".into()));
    }
    let n = examples.len() as f64;
    let clean = examples.iter().filter(|e| e.original_prediction == e.label).count() as f64 / n;
    let adv = examples.iter().filter(|e| e.adversarial_prediction == e.label).count() as f64 / n;
    Ok(AttackSet {
        source_model: model.model_id().to_string(),
        config: *config,
        seed,
        examples,
        failures,
        clean_accuracy: clean,
        adversarial_accuracy: adv,
    })
}

/// Re-score a stored attack set against a (possibly different) model:
/// returns (clean accuracy, adversarial accuracy) on that model.
pub fn replay(model: &dyn Classifier, set: &AttackSet) -> Result<(f64, f64)> {
    let mut clean = 0usize;
    let mut adv = 0usize;
    let preds: Vec<(usize, usize)> = set
        .examples
        .par_iter()
        .map(|ex| Ok((model.predict(&ex.original)?, model.predict(&ex.perturbed)?)))
        .collect::<Result<_>>()?;
    for (ex, (p_clean, p_adv)) in set.examples.iter().zip(&preds) {
        if *p_clean == ex.label {
            clean += 1;
        }
        if *p_adv == ex.label {
            adv += 1;
        }
    }
    let n = set.examples.len() as f64;
    Ok((clean as f64 / n, adv as f64 / n))
}

const MAGIC: &[u8; 4] = b"QATK";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct Manifest {
    source_model: String,
    config: AttackConfig,
    seed: u64,
    width: usize,
    height: usize,
    labels: Vec<usize>,
    original_predictions: Vec<usize>,
    adversarial_predictions: Vec<usize>,
    clean_accuracy: f64,
    adversarial_accuracy: f64,
    failures: Vec<(usize, String)>,
}

/// Write an attack set: magic, version, JSON manifest, then per example the
/// original and perturbed pixel blocks as little-endian f64.
pub fn save_attack_set(path: &Path, set: &AttackSet) -> Result<()> {
    let first = set
        .examples
        .first()
        .ok_or_else(|| Error::DegenerateInput("attack set has no examples".into()))?;
    let manifest = Manifest {
        source_model: set.source_model.clone(),
        config: set.config,
        seed: set.seed,
        width: first.original.width(),
        height: first.original.height(),
        labels: set.examples.iter().map(|e| e.label).collect(),
        original_predictions: set.examples.iter().map(|e| e.original_prediction).collect(),
        adversarial_predictions: set.examples.iter().map(|e| e.adversarial_prediction).collect(),
        clean_accuracy: set.clean_accuracy,
        adversarial_accuracy: set.adversarial_accuracy,
        failures: set.failures.clone(),
    };
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    let mbytes = serde_json::to_vec(&manifest)
        .map_err(|e| Error::Format(format!("cannot serialize attack manifest: {e}")))?;
    w.write_all(&(mbytes.len() as u32).to_le_bytes())?;
    w.write_all(&mbytes)?;
    w.write_all(&(set.examples.len() as u64).to_le_bytes())?;
    w.write_all(&((first.original.len()) as u64).to_le_bytes())?;
    for ex in &set.examples {
        for v in ex.original.values() {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in ex.perturbed.values() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn load_attack_set(path: &Path) -> Result<AttackSet> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Format(format!(
            "{} is not an attack set (bad magic)",
            path.display()
        )));
    }
    let mut u32buf = [0u8; 4];
    r.read_exact(&mut u32buf)?;
    let version = u32::from_le_bytes(u32buf);
    if version != VERSION {
        return Err(Error::Format(format!("attack set version {version} not supported")));
    }
    r.read_exact(&mut u32buf)?;
    let mlen = u32::from_le_bytes(u32buf) as usize;
    let mut mbytes = vec![0u8; mlen];
    r.read_exact(&mut mbytes)?;
    let manifest: Manifest = serde_json::from_slice(&mbytes)
        .map_err(|e| Error::Format(format!("corrupt attack manifest: {e}")))?;
    let mut u64buf = [0u8; 8];
    r.read_exact(&mut u64buf)?;
    let n = u64::from_le_bytes(u64buf) as usize;
    r.read_exact(&mut u64buf)?;
    let pixels = u64::from_le_bytes(u64buf) as usize;
    if manifest.labels.len() != n || pixels != manifest.width * manifest.height {
        return Err(Error::Format("attack set manifest disagrees with pixel blocks".into()));
    }
    let read_block = |r: &mut BufReader<File>| -> Result<Vec<f64>> {
        let mut block = Vec::with_capacity(pixels);
        let mut buf = [0u8; 8];
        for _ in 0..pixels {
            r.read_exact(&mut buf)?;
            block.push(f64::from_le_bytes(buf));
        }
        Ok(block)
    };
    let mut examples = Vec::with_capacity(n);
    for i in 0..n {
        let original =
            PixelVector::new(read_block(&mut r)?, manifest.width, manifest.height)?;
        let perturbed =
            PixelVector::new(read_block(&mut r)?, manifest.width, manifest.height)?;
        let delta: Vec<f64> =
            perturbed.values().iter().zip(original.values()).map(|(p, o)| p - o).collect();
        examples.push(AdversarialExample {
            original,
            perturbed,
            delta,
            source_model: manifest.source_model.clone(),
            config: manifest.config,
            label: manifest.labels[i],
            original_prediction: manifest.original_predictions[i],
            adversarial_prediction: manifest.adversarial_predictions[i],
            step_losses: Vec::new(),
        });
    }
    Ok(AttackSet {
        source_model: manifest.source_model,
        config: manifest.config,
        seed: manifest.seed,
        examples,
        failures: manifest.failures,
        clean_accuracy: manifest.clean_accuracy,
        adversarial_accuracy: manifest.adversarial_accuracy,
    })
}
