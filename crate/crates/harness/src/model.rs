//! A family-erased handle over trained models so the pipelines can treat
//! quantum and classical classifiers uniformly.

use std::path::Path;

use qadv_core::checkpoint;
use qadv_core::classical::{ClassicalModel, ClassicalSpec};
use qadv_core::classifier::Classifier;
use qadv_core::data::Dataset;
use qadv_core::qvc::QvcModel;
use qadv_core::train::{self, History, TrainConfig};
use qadv_core::{Error, Result};

use crate::config::{ModelKind, ModelSpec};

#[derive(Debug, Clone)]
pub enum TrainedModel {
    Qvc(QvcModel),
    Classical(ClassicalModel),
}

impl TrainedModel {
    /// Instantiate with seeded random parameters for a dataset geometry.
    pub fn build(
        spec: &ModelSpec,
        classes: usize,
        width: usize,
        height: usize,
        init_seed: u64,
    ) -> Result<Self> {
        match &spec.kind {
            ModelKind::Qvc { qubits, layers, temperature } => {
                let model = QvcModel::new(*qubits, *layers, classes)?
                    .with_temperature(*temperature)?
                    .with_model_id(&spec.id)
                    .init_random(init_seed);
                let capacity = 1usize
                    .checked_shl(*qubits as u32)
                    .ok_or_else(|| Error::Capacity(format!("{qubits} qubits overflow")))?;
                if width * height > capacity {
                    return Err(Error::Config(format!(
                        "model '{}' with {qubits} qubits cannot encode {width}x{height} images",
                        spec.id
                    )));
                }
                Ok(TrainedModel::Qvc(model))
            }
            ModelKind::ConvNet { channels, hidden } => {
                let arch = ClassicalSpec::ConvNet {
                    width,
                    height,
                    channels: *channels,
                    hidden: *hidden,
                    classes,
                };
                Ok(TrainedModel::Classical(
                    ClassicalModel::new(arch)?.with_model_id(&spec.id).init_he(init_seed),
                ))
            }
            ModelKind::Mlp { hidden } => {
                let arch =
                    ClassicalSpec::Mlp { input: width * height, hidden: hidden.clone(), classes };
                Ok(TrainedModel::Classical(
                    ClassicalModel::new(arch)?.with_model_id(&spec.id).init_he(init_seed),
                ))
            }
        }
    }

    pub fn as_classifier(&self) -> &dyn Classifier {
        match self {
            TrainedModel::Qvc(m) => m,
            TrainedModel::Classical(m) => m,
        }
    }

    pub fn as_qvc(&self) -> Option<&QvcModel> {
        match self {
            TrainedModel::Qvc(m) => Some(m),
            TrainedModel::Classical(_) => None,
        }
    }

    pub fn id(&self) -> &str {
        self.as_classifier().model_id()
    }

    pub fn num_classes(&self) -> usize {
        self.as_classifier().num_classes()
    }

    pub fn is_quantum(&self) -> bool {
        matches!(self, TrainedModel::Qvc(_))
    }

    pub fn set_id(&mut self, id: &str) {
        match self {
            TrainedModel::Qvc(m) => take_mut(m, |m| m.with_model_id(id)),
            TrainedModel::Classical(m) => take_mut(m, |m| m.with_model_id(id)),
        }
    }

    pub fn train(
        &mut self,
        train_set: &Dataset,
        test_set: Option<&Dataset>,
        cfg: &TrainConfig,
    ) -> Result<History> {
        match self {
            TrainedModel::Qvc(m) => train::train(m, train_set, test_set, cfg),
            TrainedModel::Classical(m) => train::train(m, train_set, test_set, cfg),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        match self {
            TrainedModel::Qvc(m) => m.save(path),
            TrainedModel::Classical(m) => m.save(path),
        }
    }

    /// Load either family, dispatching on the checkpoint's family tag.
    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = checkpoint::load(path)?;
        match ckpt.field_str("family")? {
            "qvc" => Ok(TrainedModel::Qvc(QvcModel::from_checkpoint(&ckpt)?)),
            "classical" => Ok(TrainedModel::Classical(ClassicalModel::from_checkpoint(&ckpt)?)),
            other => Err(Error::Format(format!("unknown model family '{other}'"))),
        }
    }
}

/// Apply a by-value builder method through a mutable reference.
fn take_mut<T: Clone>(slot: &mut T, f: impl FnOnce(T) -> T) {
    *slot = f(slot.clone());
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ExperimentConfig;

    #[test]
    fn builds_every_desk_model() {
        let cfg = ExperimentConfig::desk_default();
        for (i, spec) in cfg.models.iter().enumerate() {
            let model = TrainedModel::build(spec, 4, 8, 8, cfg.seed_plan().model_init(i)).unwrap();
            assert_eq!(model.id(), spec.id);
            assert_eq!(model.num_classes(), 4);
            assert_eq!(model.is_quantum(), spec.kind.is_quantum());
        }
    }

    #[test]
    fn save_load_round_trips_both_families() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = ExperimentConfig::desk_default();
        for spec in [&cfg.models[0], &cfg.models[3]] {
            let model = TrainedModel::build(spec, 4, 8, 8, 9).unwrap();
            let path = dir.path().join(format!("{}.qckp", spec.id));
            model.save(&path).unwrap();
            let back = TrainedModel::load(&path).unwrap();
            assert_eq!(back.id(), model.id());
            assert_eq!(back.is_quantum(), model.is_quantum());
        }
    }

    #[test]
    fn too_many_pixels_for_the_qubit_count_is_rejected() {
        let cfg = ExperimentConfig::desk_default();
        let err = TrainedModel::build(&cfg.models[0], 4, 16, 16, 1).unwrap_err();
        assert_eq!(err.category(), "config");
    }
}
