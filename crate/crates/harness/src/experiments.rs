//! The experiment pipelines behind each CLI subcommand. Every pipeline is a
//! pure function of (config, seeds): checkpoints and attack sets are cached
//! under a config-hash directory, CSV + manifest land in the output root.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qadv_core::attack::{self, AttackConfig, AttackKind, AttackSet};
use qadv_core::data::{self, Dataset};
use qadv_core::encoding::PixelVector;
use qadv_core::noise::{self, NoiseModel};
use qadv_core::optim::AdamParams;
use qadv_core::train::{AdvTrainConfig, TrainConfig};
use qadv_core::{Error, Result};

use crate::config::{ExperimentConfig, ModelSpec, SeedPlan};
use crate::model::TrainedModel;
use crate::pgm;
use crate::report::{
    accuracy_csv, history_csv, noise_csv, write_text, AccuracyRow, DetectionReport, RunManifest,
    TransferReport,
};

/// Validated config plus everything derived from it that the pipelines share.
pub struct Context {
    pub cfg: ExperimentConfig,
    pub hash: String,
    pub plan: SeedPlan,
    pub train_set: Dataset,
    pub test_set: Dataset,
}

impl Context {
    pub fn new(cfg: ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash();
        let plan = cfg.seed_plan();
        let (train_set, test_set) = crate::config::load_dataset(&cfg)?;
        Ok(Context { cfg, hash, plan, train_set, test_set })
    }

    fn cache_dir(&self) -> PathBuf {
        self.cfg.out_dir.join("cache").join(&self.hash)
    }

    pub fn checkpoint_path(&self, id: &str) -> PathBuf {
        self.cache_dir().join("models").join(format!("{id}.qckp"))
    }

    fn attack_set_path(&self, tag: &str) -> PathBuf {
        self.cache_dir().join("attacks").join(format!("{tag}.qatk"))
    }

    fn manifest(&self, command: &str) -> RunManifest {
        RunManifest::new(command, &self.hash, self.cfg.seed, self.plan.as_map(), &self.cfg.out_dir)
    }

    fn train_config(&self, spec: &ModelSpec, index: usize) -> TrainConfig {
        TrainConfig {
            epochs: spec.epochs.unwrap_or(self.cfg.training.epochs),
            batch_size: self.cfg.training.batch_size,
            adam: AdamParams { lr: spec.lr.unwrap_or(self.cfg.training.lr), ..Default::default() },
            seed: self.plan.train_shuffle(index),
            adversarial: None,
        }
    }

    /// Load the cached checkpoint for `id`, or train it from scratch when
    /// allowed. Training also writes the per-epoch history CSV.
    pub fn ensure_trained(&self, id: &str, allow_train: bool) -> Result<TrainedModel> {
        let path = self.checkpoint_path(id);
        if path.exists() {
            let model = TrainedModel::load(&path)?;
            if model.id() != id {
                return Err(Error::Format(format!(
                    "checkpoint {} holds model '{}', expected '{}'",
                    path.display(),
                    model.id(),
                    id
                )));
            }
            return Ok(model);
        }
        if !allow_train {
            return Err(Error::Config(format!(
                "missing checkpoint for '{id}' at {} (run `qadv train` first or set \
                 transfer.train_missing = true)",
                path.display()
            )));
        }
        let (index, spec) = self.cfg.model_spec(id)?;
        let (width, height) = self.cfg.dataset.dims();
        let mut model = TrainedModel::build(
            spec,
            self.cfg.dataset.classes(),
            width,
            height,
            self.plan.model_init(index),
        )?;
        let cfg = self.train_config(spec, index);
        let history = model.train(&self.train_set, Some(&self.test_set), &cfg)?;
        create_parent(&path)?;
        model.save(&path)?;
        write_text(
            &self.cfg.out_dir.join(format!("history_{id}.csv")),
            &history_csv(&history),
        )?;
        let last = history.last().expect("nonempty history");
        println!(
            "trained {id}: {} epochs, train acc {:.3}, test acc {:.3}",
            history.len(),
            last.train_acc,
            last.test_acc.unwrap_or(f64::NAN)
        );
        Ok(model)
    }

    /// The fixed evaluation subset every attack pipeline perturbs.
    pub fn attack_subset(&self) -> Result<Dataset> {
        let n = self.cfg.attack.eval_examples.min(self.test_set.len());
        data::select_subset(&self.test_set, n, self.plan.attack_subset)
    }

    fn attack_config(&self, kind: &str, epsilon: f64, steps: usize) -> Result<AttackConfig> {
        let cfg = match kind {
            "fgsm" => AttackConfig::fgsm(epsilon),
            "pgd" => AttackConfig::pgd(epsilon, steps),
            other => return Err(Error::Config(format!("unknown attack kind '{other}'"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Generate (or load from cache) the white-box attack set for one
    /// (model, ε) cell over the shared evaluation subset.
    pub fn ensure_attack_set(
        &self,
        model: &TrainedModel,
        subset: &Dataset,
        epsilon: f64,
        seed: u64,
    ) -> Result<AttackSet> {
        let tag = format!("{}_eps{}", model.id(), epsilon);
        let path = self.attack_set_path(&tag);
        if path.exists() {
            return attack::load_attack_set(&path);
        }
        let config = self.attack_config(&self.cfg.attack.kind, epsilon, self.cfg.attack.steps)?;
        let set = attack::attack_batch(
            model.as_classifier(),
            &subset.images,
            subset.labels.as_slice(),
            &config,
            seed,
        )?;
        for (idx, msg) in &set.failures {
            eprintln!("warning: attack on example {idx} failed: {msg}");
        }
        create_parent(&path)?;
        attack::save_attack_set(&path, &set)?;
        Ok(set)
    }
}

/// `train`: fit every configured model (or one) and record clean accuracies.
pub fn cmd_train(ctx: &Context, only: Option<&str>) -> Result<Vec<AccuracyRow>> {
    let mut manifest = ctx.manifest("train");
    let mut rows = Vec::new();
    for spec in &ctx.cfg.models {
        if only.is_some_and(|id| id != spec.id) {
            continue;
        }
        let model = ctx.ensure_trained(&spec.id, true)?;
        let accuracy = ctx.test_set.accuracy(model.as_classifier())?;
        rows.push(AccuracyRow {
            epsilon: 0.0,
            target_id: spec.id.clone(),
            accuracy,
            n_examples: ctx.test_set.len(),
            seed: ctx.cfg.seed,
            config_hash: ctx.hash.clone(),
        });
        manifest.add_output(&ctx.checkpoint_path(&spec.id));
    }
    if rows.is_empty() {
        return Err(Error::Config(format!(
            "--model {} matches no configured model",
            only.unwrap_or("<none>")
        )));
    }
    let csv_path = ctx.cfg.out_dir.join("train.csv");
    write_text(&csv_path, &accuracy_csv(&rows))?;
    manifest.add_output(&csv_path);
    manifest.save()?;
    Ok(rows)
}

/// `attack`: white-box curves — attack each model across the ε grid and
/// record its own accuracy on the perturbed images.
pub fn cmd_attack(ctx: &Context, only: Option<&str>) -> Result<Vec<AccuracyRow>> {
    let mut manifest = ctx.manifest("attack");
    let subset = ctx.attack_subset()?;
    let mut rows = Vec::new();
    for (index, spec) in ctx.cfg.models.iter().enumerate() {
        if only.is_some_and(|id| id != spec.id) {
            continue;
        }
        let model = ctx.ensure_trained(&spec.id, true)?;
        let mut clean_recorded = ctx.cfg.attack.epsilon_grid.contains(&0.0);
        for (e, &eps) in ctx.cfg.attack.epsilon_grid.iter().enumerate() {
            let seed = ctx.plan.attack(index, e);
            let set = ctx.ensure_attack_set(&model, &subset, eps, seed)?;
            if !clean_recorded {
                rows.push(AccuracyRow {
                    epsilon: 0.0,
                    target_id: spec.id.clone(),
                    accuracy: set.clean_accuracy,
                    n_examples: set.examples.len(),
                    seed,
                    config_hash: ctx.hash.clone(),
                });
                clean_recorded = true;
            }
            rows.push(AccuracyRow {
                epsilon: eps,
                target_id: spec.id.clone(),
                accuracy: set.adversarial_accuracy,
                n_examples: set.examples.len(),
                seed,
                config_hash: ctx.hash.clone(),
            });
        }
    }
    if rows.is_empty() {
        return Err(Error::Config(format!(
            "--model {} matches no configured model",
            only.unwrap_or("<none>")
        )));
    }
    let csv_path = ctx.cfg.out_dir.join("attack.csv");
    write_text(&csv_path, &accuracy_csv(&rows))?;
    manifest.add_output(&csv_path);
    manifest.save()?;
    Ok(rows)
}

/// One source model's transfer report: generate white-box sets on the
/// source, replay every set on every target.
pub fn run_transfer(ctx: &Context, source_id: &str) -> Result<TransferReport> {
    let (source_index, _) = ctx.cfg.model_spec(source_id)?;
    let allow = ctx.cfg.transfer.train_missing;
    let source = ctx.ensure_trained(source_id, allow)?;
    let target_ids = ctx.cfg.transfer_targets();
    let targets: Vec<TrainedModel> = target_ids
        .iter()
        .map(|id| ctx.ensure_trained(id, allow))
        .collect::<Result<_>>()?;
    let subset = ctx.attack_subset()?;
    let grid = ctx.cfg.attack.epsilon_grid.clone();

    let mut accuracy = vec![vec![f64::NAN; grid.len()]; targets.len()];
    let mut clean = vec![f64::NAN; targets.len()];
    for (e, &eps) in grid.iter().enumerate() {
        let set = ctx.ensure_attack_set(&source, &subset, eps, ctx.plan.attack(source_index, e))?;
        for (t, target) in targets.iter().enumerate() {
            let (clean_acc, adv_acc) = attack::replay(target.as_classifier(), &set)?;
            accuracy[t][e] = adv_acc;
            if e == 0 {
                clean[t] = clean_acc;
            } else if clean[t] != clean_acc {
                return Err(Error::Training(format!(
                    "clean accuracy of '{}' changed between attack sets: {} vs {}",
                    target_ids[t], clean[t], clean_acc
                )));
            }
        }
    }
    let report = TransferReport {
        source_id: source_id.into(),
        target_ids,
        epsilon_grid: grid,
        accuracy,
        clean,
        n_examples: subset.len(),
        seed: ctx.cfg.seed,
    };
    report.validate()?;
    Ok(report)
}

/// `transfer`: a report per configured source, plus a cross-family
/// accuracy-drop summary (reported, never asserted).
pub fn cmd_transfer(ctx: &Context) -> Result<Vec<TransferReport>> {
    let mut manifest = ctx.manifest("transfer");
    let mut reports = Vec::new();
    for source_id in &ctx.cfg.transfer.sources {
        let report = run_transfer(ctx, source_id)?;
        let csv_path = ctx.cfg.out_dir.join(format!("transfer_{source_id}.csv"));
        write_text(&csv_path, &accuracy_csv(&report.rows(&ctx.hash)))?;
        manifest.add_output(&csv_path);
        reports.push(report);
    }
    let summary = transfer_summary(ctx, &reports)?;
    let summary_path = ctx.cfg.out_dir.join("transfer_summary.json");
    write_text(
        &summary_path,
        &serde_json::to_string_pretty(&summary)
            .map_err(|e| Error::Format(format!("summary serialization: {e}")))?,
    )?;
    manifest.add_output(&summary_path);
    manifest.save()?;
    Ok(reports)
}

/// Mean accuracy drop (clean − attacked) by source family → target family,
/// per ε, across all transfer reports. The cross-family rows quantify the
/// transfer asymmetry between classical and quantum models.
fn transfer_summary(
    ctx: &Context,
    reports: &[TransferReport],
) -> Result<serde_json::Value> {
    let family = |id: &str| -> Result<&'static str> {
        let (_, spec) = ctx.cfg.model_spec(id)?;
        Ok(if spec.kind.is_quantum() { "quantum" } else { "classical" })
    };
    let mut cells: BTreeMap<String, BTreeMap<String, (f64, usize)>> = BTreeMap::new();
    for report in reports {
        let source_family = family(&report.source_id)?;
        for (t, target_id) in report.target_ids.iter().enumerate() {
            if *target_id == report.source_id {
                continue; // white-box cell, not transfer
            }
            let target_family = family(target_id)?;
            for (e, &eps) in report.epsilon_grid.iter().enumerate() {
                let drop = report.clean[t] - report.accuracy[t][e];
                let entry = cells
                    .entry(format!("{source_family}->{target_family}"))
                    .or_default()
                    .entry(format!("{eps}"))
                    .or_insert((0.0, 0));
                entry.0 += drop;
                entry.1 += 1;
            }
        }
    }
    let mean_drops: BTreeMap<String, BTreeMap<String, f64>> = cells
        .into_iter()
        .map(|(k, by_eps)| {
            (k, by_eps.into_iter().map(|(e, (sum, n))| (e, sum / n as f64)).collect())
        })
        .collect();
    Ok(serde_json::json!({
        "seed": ctx.cfg.seed,
        "config_hash": ctx.hash,
        "n_examples": ctx.cfg.attack.eval_examples.min(ctx.test_set.len()),
        "mean_accuracy_drop_by_direction": mean_drops,
        "note": "cross-family drops quantify transfer asymmetry; desk-scale, reported not asserted",
    }))
}

/// `advtrain`: for each ε^train, train a twin of the base model whose
/// batches mix 50% clean and 50% PGD examples built against the current
/// parameters, then compare both twins under a white-box PGD at ε^train.
pub fn cmd_advtrain(ctx: &Context, only: Option<&str>) -> Result<Vec<AccuracyRow>> {
    let base_id = only.unwrap_or(&ctx.cfg.adv_training.model).to_string();
    let (index, spec) = ctx.cfg.model_spec(&base_id)?;
    let spec = spec.clone();
    let mut manifest = ctx.manifest("advtrain");
    let standard = ctx.ensure_trained(&base_id, true)?;
    manifest.add_output(&ctx.checkpoint_path(&base_id));
    let subset = ctx.attack_subset()?;
    let mut rows = Vec::new();
    for (e, &eps) in ctx.cfg.adv_training.epsilons.iter().enumerate() {
        let twin_id = format!("{base_id}^{eps}");
        let twin_path = ctx.checkpoint_path(&twin_id);
        let twin = if twin_path.exists() {
            TrainedModel::load(&twin_path)?
        } else {
            let (width, height) = ctx.cfg.dataset.dims();
            // Same init and shuffle seeds as the standard twin: the runs
            // differ only in the adversarial half of each batch.
            let mut model = TrainedModel::build(
                &spec,
                ctx.cfg.dataset.classes(),
                width,
                height,
                ctx.plan.model_init(index),
            )?;
            model.set_id(&twin_id);
            let mut train_cfg = ctx.train_config(&spec, index);
            train_cfg.adversarial = Some(AdvTrainConfig {
                epsilon: eps,
                steps: ctx.cfg.adv_training.steps,
                mix: ctx.cfg.adv_training.mix,
            });
            let history = model.train(&ctx.train_set, Some(&ctx.test_set), &train_cfg)?;
            create_parent(&twin_path)?;
            model.save(&twin_path)?;
            write_text(
                &ctx.cfg.out_dir.join(format!("history_{twin_id}.csv")),
                &history_csv(&history),
            )?;
            let last = history.last().expect("nonempty history");
            println!(
                "adversarially trained {twin_id}: train acc {:.3}, test acc {:.3}",
                last.train_acc,
                last.test_acc.unwrap_or(f64::NAN)
            );
            model
        };
        manifest.add_output(&twin_path);

        // Robustness comparison: white-box PGD at ε^train against each twin.
        let pgd_cfg = self::pgd_eval_config(ctx, eps)?;
        for (which, model) in [(0u64, &standard), (1u64, &twin)] {
            let seed = ctx.plan.advtrain_attack(index, e).wrapping_add(which);
            let set = attack::attack_batch(
                model.as_classifier(),
                &subset.images,
                &subset.labels,
                &pgd_cfg,
                seed,
            )?;
            // The standard twin's clean accuracy is ε^train-independent;
            // record it once.
            if which == 1 || e == 0 {
                rows.push(AccuracyRow {
                    epsilon: 0.0,
                    target_id: model.id().to_string(),
                    accuracy: set.clean_accuracy,
                    n_examples: set.examples.len(),
                    seed,
                    config_hash: ctx.hash.clone(),
                });
            }
            rows.push(AccuracyRow {
                epsilon: eps,
                target_id: model.id().to_string(),
                accuracy: set.adversarial_accuracy,
                n_examples: set.examples.len(),
                seed,
                config_hash: ctx.hash.clone(),
            });
        }
    }
    let csv_path = ctx.cfg.out_dir.join(format!("advtrain_{base_id}.csv"));
    write_text(&csv_path, &accuracy_csv(&rows))?;
    manifest.add_output(&csv_path);
    manifest.save()?;
    Ok(rows)
}

fn pgd_eval_config(ctx: &Context, epsilon: f64) -> Result<AttackConfig> {
    let cfg = AttackConfig::pgd(epsilon, ctx.cfg.attack.steps);
    cfg.validate()?;
    Ok(cfg)
}

fn create_parent(path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(())
}

/// Pools plus per-example attack specs for the detector evaluation.
struct AttackedSlot {
    image_index: usize,
    kind: AttackKind,
    epsilon: f64,
    against_quantum: bool,
}

/// Disagreement detection: flag an input when the classical and quantum
/// predictions differ; score the flag over a clean and an attacked pool.
pub fn run_detection(
    ctx: &Context,
    classical: &TrainedModel,
    quantum: &TrainedModel,
) -> Result<DetectionReport> {
    if classical.num_classes() != quantum.num_classes() {
        return Err(Error::Config(format!(
            "label-space mismatch: '{}' has {} classes, '{}' has {}",
            classical.id(),
            classical.num_classes(),
            quantum.id(),
            quantum.num_classes()
        )));
    }
    let det = &ctx.cfg.detection;
    let test = &ctx.test_set;

    // Clean pool: uniform draws (with replacement) from the test set.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.plan.detection_clean);
    let clean_indices: Vec<usize> =
        (0..det.clean_pool).map(|_| rng.gen_range(0..test.len())).collect();

    // Attacked pool: uniform over image × kind × ε × attacked model.
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.plan.detection_attacked);
    let slots: Vec<AttackedSlot> = (0..det.attacked_pool)
        .map(|_| {
            let image_index = rng.gen_range(0..test.len());
            let kind = match det.kinds[rng.gen_range(0..det.kinds.len())].as_str() {
                "fgsm" => AttackKind::Fgsm,
                _ => AttackKind::Pgd,
            };
            let epsilon = det.epsilons[rng.gen_range(0..det.epsilons.len())];
            let against_quantum =
                det.attack_against[rng.gen_range(0..det.attack_against.len())] == "quantum";
            AttackedSlot { image_index, kind, epsilon, against_quantum }
        })
        .collect();

    let disagree = |x: &PixelVector| -> Result<bool> {
        Ok(classical.as_classifier().predict(x)? != quantum.as_classifier().predict(x)?)
    };

    let clean_flags: Vec<bool> = clean_indices
        .par_iter()
        .map(|&i| disagree(&test.images[i]))
        .collect::<Result<_>>()?;

    let attack_seed = ctx.plan.detection_attacked;
    let attacked_flags: Vec<bool> = slots
        .par_iter()
        .enumerate()
        .map(|(i, slot)| {
            let x = &test.images[slot.image_index];
            let label = test.labels[slot.image_index];
            let config = match slot.kind {
                AttackKind::Fgsm => AttackConfig::fgsm(slot.epsilon),
                AttackKind::Pgd => AttackConfig::pgd(slot.epsilon, ctx.cfg.attack.steps),
            };
            let target: &dyn qadv_core::classifier::Classifier = if slot.against_quantum {
                quantum.as_classifier()
            } else {
                classical.as_classifier()
            };
            let mut rng = ChaCha8Rng::seed_from_u64(attack_seed);
            rng.set_stream(i as u64 + 1);
            let ex = attack::attack(target, x, label, &config, &mut rng)?;
            disagree(&ex.perturbed)
        })
        .collect::<Result<_>>()?;

    let false_positives = clean_flags.iter().filter(|f| **f).count();
    let true_positives = attacked_flags.iter().filter(|f| **f).count();
    let report = DetectionReport {
        true_positives,
        false_negatives: det.attacked_pool - true_positives,
        false_positives,
        true_negatives: det.clean_pool - false_positives,
        clean_pool: det.clean_pool,
        attacked_pool: det.attacked_pool,
    };
    report.validate()?;
    Ok(report)
}

/// `detect`: evaluate the configured classical/quantum pair.
pub fn cmd_detect(ctx: &Context) -> Result<DetectionReport> {
    let det = &ctx.cfg.detection;
    let (_, c_spec) = ctx.cfg.model_spec(&det.classical)?;
    if c_spec.kind.is_quantum() {
        return Err(Error::Config(format!(
            "detection.classical = '{}' is a quantum model",
            det.classical
        )));
    }
    let (_, q_spec) = ctx.cfg.model_spec(&det.quantum)?;
    if !q_spec.kind.is_quantum() {
        return Err(Error::Config(format!(
            "detection.quantum = '{}' is not a quantum model",
            det.quantum
        )));
    }
    let classical = ctx.ensure_trained(&det.classical, true)?;
    let quantum = ctx.ensure_trained(&det.quantum, true)?;
    let report = run_detection(ctx, &classical, &quantum)?;
    let mut manifest = ctx.manifest("detect");
    manifest.details = serde_json::json!({
        "classical": det.classical,
        "quantum": det.quantum,
        "kinds": det.kinds,
        "epsilons": det.epsilons,
        "attack_against": det.attack_against,
    });
    let csv_path = ctx.cfg.out_dir.join("detection.csv");
    write_text(&csv_path, &report.csv(ctx.cfg.seed, &ctx.hash))?;
    manifest.add_output(&csv_path);
    manifest.save()?;
    println!(
        "detection: tp {} fn {} fp {} tn {} (tp rate {:.3}, fp rate {:.3})",
        report.true_positives,
        report.false_negatives,
        report.false_positives,
        report.true_negatives,
        report.tp_rate(),
        report.fp_rate()
    );
    Ok(report)
}

/// `noise-sweep`: trajectory-sampled accuracy of a quantum model under each
/// configured channel and strength.
pub fn cmd_noise(ctx: &Context, only: Option<&str>) -> Result<Vec<qadv_core::noise::NoiseSweepRow>> {
    let id = only.unwrap_or(&ctx.cfg.noise.model).to_string();
    let model = ctx.ensure_trained(&id, true)?;
    let Some(qvc) = model.as_qvc() else {
        return Err(Error::Config(format!("noise sweep requires a qvc model, '{id}' is not")));
    };
    let n = ctx.cfg.noise.examples.min(ctx.test_set.len());
    let subset = data::select_subset(&ctx.test_set, n, ctx.plan.noise_eval)?;
    let mut grid = Vec::new();
    for kind in &ctx.cfg.noise.kinds {
        for &s in &ctx.cfg.noise.strengths {
            grid.push(match kind.as_str() {
                "depolarizing" => NoiseModel::depolarizing(s)?,
                "amplitude-damping" => NoiseModel::amplitude_damping(s)?,
                "bit-flip" => NoiseModel::bit_flip(s)?,
                other => return Err(Error::Config(format!("unknown noise kind '{other}'"))),
            });
        }
    }
    let rows = noise::noisy_accuracy_sweep(
        qvc,
        &subset.images,
        &subset.labels,
        &grid,
        ctx.cfg.noise.trajectories,
        ctx.plan.noise_eval,
    )?;
    let mut manifest = ctx.manifest("noise-sweep");
    let csv_path = ctx.cfg.out_dir.join(format!("noise_{id}.csv"));
    write_text(&csv_path, &noise_csv(&rows))?;
    manifest.add_output(&csv_path);
    manifest.save()?;
    Ok(rows)
}

/// `export`: PGM gallery (original / signed delta / perturbed) for the first
/// few examples of a white-box attack at the configured ε.
pub fn cmd_export(ctx: &Context, only: Option<&str>) -> Result<Vec<PathBuf>> {
    let id = only.unwrap_or(&ctx.cfg.export.model).to_string();
    let model = ctx.ensure_trained(&id, true)?;
    let subset = ctx.attack_subset()?;
    let take = ctx.cfg.export.examples.min(subset.len());
    let images = subset.images[..take].to_vec();
    let labels = subset.labels[..take].to_vec();
    let config =
        ctx.attack_config(&ctx.cfg.attack.kind, ctx.cfg.export.epsilon, ctx.cfg.attack.steps)?;
    let (index, _) = ctx.cfg.model_spec(&id)?;
    let seed = ctx.plan.attack(index, 9_000);
    let set = attack::attack_batch(model.as_classifier(), &images, &labels, &config, seed)?;
    let dir = ctx.cfg.out_dir.join("export").join(&id);
    let written = pgm::export_perturbations(&set, &dir, take)?;
    let mut manifest = ctx.manifest("export");
    for p in &written {
        manifest.add_output(p);
    }
    manifest.save()?;
    println!("exported {} images to {}", written.len(), dir.display());
    Ok(written)
}
