//! Experiment configuration: TOML schema, validation, seed derivation, and
//! the content hash that keys every artifact a run produces.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use qadv_core::data::{self, Dataset};
use qadv_core::{Error, Result};

/// Where the input data comes from. Synthetic generators are seeded from the
/// run seed; `idx` reads MNIST-format files and downscales them.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum DatasetSpec {
    SynthDigits {
        classes: usize,
        width: usize,
        height: usize,
        train_examples: usize,
        test_examples: usize,
    },
    SynthBlobs {
        classes: usize,
        width: usize,
        height: usize,
        train_examples: usize,
        test_examples: usize,
    },
    Idx {
        train_images: PathBuf,
        train_labels: PathBuf,
        test_images: PathBuf,
        test_labels: PathBuf,
        classes: usize,
        width: usize,
        height: usize,
        train_examples: usize,
        test_examples: usize,
    },
}

impl DatasetSpec {
    pub fn classes(&self) -> usize {
        match self {
            DatasetSpec::SynthDigits { classes, .. }
            | DatasetSpec::SynthBlobs { classes, .. }
            | DatasetSpec::Idx { classes, .. } => *classes,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            DatasetSpec::SynthDigits { width, height, .. }
            | DatasetSpec::SynthBlobs { width, height, .. }
            | DatasetSpec::Idx { width, height, .. } => (*width, *height),
        }
    }

    pub fn sizes(&self) -> (usize, usize) {
        match self {
            DatasetSpec::SynthDigits { train_examples, test_examples, .. }
            | DatasetSpec::SynthBlobs { train_examples, test_examples, .. }
            | DatasetSpec::Idx { train_examples, test_examples, .. } => {
                (*train_examples, *test_examples)
            }
        }
    }
}

/// Model architecture plus optional per-model training overrides.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ModelSpec {
    pub id: String,
    #[serde(flatten)]
    pub kind: ModelKind,
    /// Overrides `[training].lr` for this model when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lr: Option<f64>,
    /// Overrides `[training].epochs` for this model when set.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epochs: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum ModelKind {
    Qvc {
        qubits: usize,
        layers: usize,
        #[serde(default = "default_temperature")]
        temperature: f64,
    },
    ConvNet {
        #[serde(default = "default_channels")]
        channels: [usize; 3],
        #[serde(default = "default_hidden")]
        hidden: usize,
    },
    Mlp {
        #[serde(default = "default_mlp_hidden")]
        hidden: Vec<usize>,
    },
}

impl ModelKind {
    pub fn family_label(&self) -> &'static str {
        match self {
            ModelKind::Qvc { .. } => "qvc",
            ModelKind::ConvNet { .. } => "convnet",
            ModelKind::Mlp { .. } => "mlp",
        }
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, ModelKind::Qvc { .. })
    }
}

fn default_temperature() -> f64 {
    1.0
}
fn default_channels() -> [usize; 3] {
    [8, 16, 32]
}
fn default_hidden() -> usize {
    32
}
fn default_mlp_hidden() -> Vec<usize> {
    vec![32]
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainingSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
}

impl Default for TrainingSpec {
    fn default() -> Self {
        TrainingSpec { epochs: 30, batch_size: 25, lr: 0.05 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AttackSpec {
    /// "pgd" or "fgsm".
    pub kind: String,
    pub steps: usize,
    /// Sorted ascending; pixel units.
    pub epsilon_grid: Vec<f64>,
    /// Test images attacked per (model, ε) cell.
    pub eval_examples: usize,
}

impl Default for AttackSpec {
    fn default() -> Self {
        AttackSpec {
            kind: "pgd".into(),
            steps: 20,
            epsilon_grid: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            eval_examples: 250,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct AdvTrainingSpec {
    /// Model id to harden (overridable with --model).
    pub model: String,
    /// ε^train values; each produces a twin checkpoint `id^ε`.
    pub epsilons: Vec<f64>,
    pub steps: usize,
    pub mix: f64,
}

impl Default for AdvTrainingSpec {
    fn default() -> Self {
        AdvTrainingSpec { model: "convnet".into(), epsilons: vec![0.1], steps: 3, mix: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct DetectionSpec {
    pub classical: String,
    pub quantum: String,
    pub clean_pool: usize,
    pub attacked_pool: usize,
    /// Attack kinds sampled uniformly per attacked-pool example.
    pub kinds: Vec<String>,
    /// ε values sampled uniformly per attacked-pool example.
    pub epsilons: Vec<f64>,
    /// Which of the two models each attack is computed against; sampled
    /// uniformly. Entries: "classical" | "quantum".
    pub attack_against: Vec<String>,
}

impl Default for DetectionSpec {
    fn default() -> Self {
        DetectionSpec {
            classical: "convnet".into(),
            quantum: "qvc20".into(),
            clean_pool: 1000,
            attacked_pool: 1000,
            kinds: vec!["fgsm".into(), "pgd".into()],
            epsilons: vec![0.05, 0.1, 0.2, 0.3],
            attack_against: vec!["classical".into(), "quantum".into()],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct NoiseSpec {
    /// Quantum model id to sweep.
    pub model: String,
    /// Subset of {"depolarizing", "amplitude-damping", "bit-flip"}.
    pub kinds: Vec<String>,
    pub strengths: Vec<f64>,
    pub trajectories: usize,
    pub examples: usize,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        NoiseSpec {
            model: "qvc20".into(),
            kinds: vec!["depolarizing".into(), "amplitude-damping".into(), "bit-flip".into()],
            strengths: vec![0.0, 0.05, 0.1, 0.2, 0.4],
            trajectories: 200,
            examples: 50,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TransferSpec {
    /// Attack-generating models, one report per source.
    pub sources: Vec<String>,
    /// Replay targets; empty means every configured model.
    pub targets: Vec<String>,
    /// Train missing checkpoints in-run; when false a missing checkpoint is
    /// a configuration error.
    pub train_missing: bool,
}

impl Default for TransferSpec {
    fn default() -> Self {
        TransferSpec { sources: vec!["qvc20".into(), "convnet".into()], targets: Vec::new(), train_missing: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct ExportSpec {
    pub model: String,
    pub epsilon: f64,
    pub examples: usize,
}

impl Default for ExportSpec {
    fn default() -> Self {
        ExportSpec { model: "qvc20".into(), epsilon: 0.1, examples: 8 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    pub dataset: DatasetSpec,
    pub models: Vec<ModelSpec>,
    #[serde(default)]
    pub training: TrainingSpec,
    #[serde(default)]
    pub attack: AttackSpec,
    #[serde(default)]
    pub adv_training: AdvTrainingSpec,
    #[serde(default)]
    pub detection: DetectionSpec,
    #[serde(default)]
    pub noise: NoiseSpec,
    #[serde(default)]
    pub transfer: TransferSpec,
    #[serde(default)]
    pub export: ExportSpec,
}

fn default_seed() -> u64 {
    42
}
fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

/// Every random step gets its own derived seed; the whole plan lands in the
/// run manifest so any stage can be reproduced in isolation.
#[derive(Debug, Clone)]
pub struct SeedPlan {
    pub master: u64,
    pub dataset_train: u64,
    pub dataset_test: u64,
    pub attack_subset: u64,
    pub detection_clean: u64,
    pub detection_attacked: u64,
    pub noise_eval: u64,
}

impl SeedPlan {
    pub fn new(master: u64) -> Self {
        SeedPlan {
            master,
            dataset_train: master.wrapping_add(1),
            dataset_test: master.wrapping_add(2),
            attack_subset: master.wrapping_add(200),
            detection_clean: master.wrapping_add(2000),
            detection_attacked: master.wrapping_add(2001),
            noise_eval: master.wrapping_add(3000),
        }
    }

    /// Parameter-initialization seed for the model at `index` in the config.
    pub fn model_init(&self, index: usize) -> u64 {
        self.master.wrapping_add(10).wrapping_add(index as u64)
    }

    /// Epoch-shuffle seed for the model at `index`.
    pub fn train_shuffle(&self, index: usize) -> u64 {
        self.master.wrapping_add(100).wrapping_add(index as u64)
    }

    /// Attack-generation seed for (source model index, ε index).
    pub fn attack(&self, model_index: usize, eps_index: usize) -> u64 {
        self.master
            .wrapping_add(1000)
            .wrapping_add(model_index as u64 * 100)
            .wrapping_add(eps_index as u64)
    }

    /// Seed for the robustness comparison attacks after adversarial training.
    pub fn advtrain_attack(&self, model_index: usize, eps_index: usize) -> u64 {
        self.master
            .wrapping_add(5000)
            .wrapping_add(model_index as u64 * 100)
            .wrapping_add(eps_index as u64 * 2)
    }

    pub fn as_map(&self) -> BTreeMap<String, u64> {
        let mut m = BTreeMap::new();
        m.insert("master".into(), self.master);
        m.insert("dataset_train".into(), self.dataset_train);
        m.insert("dataset_test".into(), self.dataset_test);
        m.insert("attack_subset".into(), self.attack_subset);
        m.insert("detection_clean".into(), self.detection_clean);
        m.insert("detection_attacked".into(), self.detection_attacked);
        m.insert("noise_eval".into(), self.noise_eval);
        m
    }
}

impl ExperimentConfig {
    /// The canonical desk-scale experiment: 8×8 4-class digits, 6-qubit QVCs
    /// of 10/20/40 layers, and a reduced ConvNet + MLP.
    pub fn desk_default() -> Self {
        let qvc = |id: &str, layers: usize| ModelSpec {
            id: id.into(),
            kind: ModelKind::Qvc { qubits: 6, layers, temperature: default_temperature() },
            lr: None,
            epochs: None,
        };
        ExperimentConfig {
            seed: default_seed(),
            out_dir: default_out_dir(),
            dataset: DatasetSpec::SynthDigits {
                classes: 4,
                width: 8,
                height: 8,
                train_examples: 500,
                test_examples: 250,
            },
            models: vec![
                qvc("qvc10", 10),
                qvc("qvc20", 20),
                qvc("qvc40", 40),
                ModelSpec {
                    id: "convnet".into(),
                    kind: ModelKind::ConvNet {
                        channels: default_channels(),
                        hidden: default_hidden(),
                    },
                    lr: Some(0.005),
                    epochs: None,
                },
                ModelSpec {
                    id: "mlp".into(),
                    kind: ModelKind::Mlp { hidden: default_mlp_hidden() },
                    lr: Some(0.005),
                    epochs: None,
                },
            ],
            training: TrainingSpec::default(),
            attack: AttackSpec::default(),
            adv_training: AdvTrainingSpec::default(),
            detection: DetectionSpec::default(),
            noise: NoiseSpec::default(),
            transfer: TransferSpec::default(),
            export: ExportSpec::default(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| Error::Config(format!("cannot parse {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// First 16 hex chars of the SHA-256 of the effective config with the
    /// output directory removed: where results land must not change what
    /// they are. Keys every cached artifact and appears in every CSV row.
    pub fn hash(&self) -> String {
        let mut value = serde_json::to_value(self).expect("config serializes");
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
        }
        let canonical = serde_json::to_string(&value).expect("config serializes");
        let digest = Sha256::digest(canonical.as_bytes());
        hex::encode(&digest[..8])
    }

    pub fn seed_plan(&self) -> SeedPlan {
        SeedPlan::new(self.seed)
    }

    pub fn model_spec(&self, id: &str) -> Result<(usize, &ModelSpec)> {
        self.models
            .iter()
            .enumerate()
            .find(|(_, m)| m.id == id)
            .ok_or_else(|| Error::Config(format!("no model '{id}' in config")))
    }

    /// Effective transfer targets: configured list, or every model.
    pub fn transfer_targets(&self) -> Vec<String> {
        if self.transfer.targets.is_empty() {
            self.models.iter().map(|m| m.id.clone()).collect()
        } else {
            self.transfer.targets.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.models.is_empty() {
            return Err(Error::Config("at least one model is required".into()));
        }
        for m in &self.models {
            if m.id.is_empty()
                || !m.id.chars().all(|c| c.is_ascii_alphanumeric() || "_-.^".contains(c))
            {
                return Err(Error::Config(format!(
                    "model id '{}' must be nonempty [A-Za-z0-9_.^-]",
                    m.id
                )));
            }
            if self.models.iter().filter(|o| o.id == m.id).count() > 1 {
                return Err(Error::Config(format!("duplicate model id '{}'", m.id)));
            }
            if let Some(lr) = m.lr {
                if !(lr > 0.0) {
                    return Err(Error::Config(format!("model '{}' lr must be positive", m.id)));
                }
            }
        }
        let (train_n, test_n) = self.dataset.sizes();
        if train_n == 0 || test_n == 0 {
            return Err(Error::Config("dataset sizes must be positive".into()));
        }
        ascending_grid("attack.epsilon_grid", &self.attack.epsilon_grid)?;
        if self.attack.kind != "pgd" && self.attack.kind != "fgsm" {
            return Err(Error::Config(format!(
                "attack.kind '{}' is not 'pgd' or 'fgsm'",
                self.attack.kind
            )));
        }
        if self.attack.steps == 0 || self.attack.eval_examples == 0 {
            return Err(Error::Config("attack.steps and eval_examples must be positive".into()));
        }
        ascending_grid("adv_training.epsilons", &self.adv_training.epsilons)?;
        if !(0.0..=1.0).contains(&self.adv_training.mix) {
            return Err(Error::Config(format!(
                "adv_training.mix {} outside [0, 1]",
                self.adv_training.mix
            )));
        }
        if self.adv_training.steps == 0 {
            return Err(Error::Config("adv_training.steps must be positive".into()));
        }
        ascending_grid("detection.epsilons", &self.detection.epsilons)?;
        for k in &self.detection.kinds {
            if k != "pgd" && k != "fgsm" {
                return Err(Error::Config(format!("detection kind '{k}' is not 'pgd' or 'fgsm'")));
            }
        }
        for t in &self.detection.attack_against {
            if t != "classical" && t != "quantum" {
                return Err(Error::Config(format!(
                    "detection.attack_against entry '{t}' is not 'classical' or 'quantum'"
                )));
            }
        }
        if self.detection.kinds.is_empty()
            || self.detection.epsilons.is_empty()
            || self.detection.attack_against.is_empty()
        {
            return Err(Error::Config("detection sampling lists must be nonempty".into()));
        }
        for k in &self.noise.kinds {
            if !matches!(k.as_str(), "depolarizing" | "amplitude-damping" | "bit-flip") {
                return Err(Error::Config(format!("unknown noise kind '{k}'")));
            }
        }
        ascending_grid("noise.strengths", &self.noise.strengths)?;
        if self.training.epochs == 0 || self.training.batch_size == 0 || !(self.training.lr > 0.0)
        {
            return Err(Error::Config(
                "training epochs, batch_size, and lr must be positive".into(),
            ));
        }
        if self.export.examples == 0 {
            return Err(Error::Config("export.examples must be positive".into()));
        }
        Ok(())
    }
}

fn ascending_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Config(format!("{name} must be nonempty")));
    }
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::Config(format!(
                "{name} must be strictly ascending, got {} then {}",
                w[0], w[1]
            )));
        }
    }
    for &e in grid {
        if !(0.0..=1.0).contains(&e) {
            return Err(Error::Config(format!("{name} entry {e} outside [0, 1]")));
        }
    }
    Ok(())
}

/// Materialize the configured dataset as seeded (train, test) splits.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<(Dataset, Dataset)> {
    let plan = cfg.seed_plan();
    let (train_n, test_n) = cfg.dataset.sizes();
    match &cfg.dataset {
        DatasetSpec::SynthDigits { classes, width, height, .. } => {
            let train = sized_synth(
                |per, seed| data::synth_digits(*classes, per, *width, *height, seed),
                *classes,
                train_n,
                plan.dataset_train,
            )?;
            let test = sized_synth(
                |per, seed| data::synth_digits(*classes, per, *width, *height, seed),
                *classes,
                test_n,
                plan.dataset_test,
            )?;
            Ok((train, test))
        }
        DatasetSpec::SynthBlobs { classes, width, height, .. } => {
            let train = sized_synth(
                |per, seed| data::synth_blobs(*classes, per, *width, *height, seed),
                *classes,
                train_n,
                plan.dataset_train,
            )?;
            let test = sized_synth(
                |per, seed| data::synth_blobs(*classes, per, *width, *height, seed),
                *classes,
                test_n,
                plan.dataset_test,
            )?;
            Ok((train, test))
        }
        DatasetSpec::Idx {
            train_images,
            train_labels,
            test_images,
            test_labels,
            classes,
            width,
            height,
            ..
        } => {
            let train = data::load_idx(train_images, train_labels, *classes)?;
            let train = data::downscale(&train, *width, *height)?;
            let train = data::select_subset(&train, train_n, plan.dataset_train)?;
            let test = data::load_idx(test_images, test_labels, *classes)?;
            let test = data::downscale(&test, *width, *height)?;
            let test = data::select_subset(&test, test_n, plan.dataset_test)?;
            Ok((train, test))
        }
    }
}

/// Generate at least `n` synthetic examples, then take a seeded subset of
/// exactly `n`.
fn sized_synth(
    generate: impl Fn(usize, u64) -> Result<Dataset>,
    classes: usize,
    n: usize,
    seed: u64,
) -> Result<Dataset> {
    let per_class = n.div_ceil(classes);
    let full = generate(per_class, seed)?;
    data::select_subset(&full, n, seed.wrapping_add(500_000))
}
