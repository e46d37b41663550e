//! The quantum variational classifier: amplitude-encode, run a layered
//! Rot+CZ ansatz, read out ⟨σᶻ⟩ on the first m qubits, softmax to classes.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::{json, Map};

use crate::classifier::{Classifier, Trainable};
use crate::encoding::{encode, encode_vjp, PixelVector};
use crate::error::{Error, Result};
use crate::grad;
use crate::optim::{cross_entropy, softmax, softmax_ce_cotangents};
use crate::sim::{Gate, StateVector};
use crate::{checkpoint, checkpoint::Checkpoint};

/// A depth-`num_layers` variational circuit over `num_qubits` qubits with
/// per-layer per-qubit `Rot(φ, θ, ω)` rotations and an open CZ chain.
/// Parameters are flat, layer-major: `thetas[(layer·n + qubit)·3 + comp]`.
#[derive(Debug, Clone)]
pub struct QvcModel {
    model_id: String,
    num_qubits: usize,
    num_layers: usize,
    num_classes: usize,
    temperature: f64,
    thetas: Vec<f64>,
}

impl QvcModel {
    /// Zero-angle model; call [`init_random`](Self::init_random) before training.
    pub fn new(num_qubits: usize, num_layers: usize, num_classes: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > 30 {
            return Err(Error::Config(format!("{num_qubits} qubits out of range")));
        }
        if num_classes == 0 || num_classes > num_qubits {
            return Err(Error::Config(format!(
                "{num_classes} classes cannot be read out from {num_qubits} qubits"
            )));
        }
        Ok(QvcModel {
            model_id: format!("qvc{num_layers}-q{num_qubits}"),
            num_qubits,
            num_layers,
            num_classes,
            temperature: 1.0,
            thetas: vec![0.0; num_layers * num_qubits * 3],
        })
    }

    /// Draw every angle uniformly from [0, 2π).
    pub fn init_random(mut self, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut self.thetas {
            *t = rng.gen_range(0.0..std::f64::consts::TAU);
        }
        self
    }

    pub fn with_temperature(mut self, temperature: f64) -> Result<Self> {
        if !(temperature > 0.0) {
            return Err(Error::Config(format!("softmax temperature {temperature} must be > 0")));
        }
        self.temperature = temperature;
        Ok(self)
    }

    pub fn with_model_id(mut self, id: impl Into<String>) -> Self {
        self.model_id = id.into();
        self
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn thetas_mut(&mut self) -> &mut [f64] {
        &mut self.thetas
    }

    pub fn param_count(&self) -> usize {
        self.thetas.len()
    }

    /// Rotation + entangling gate count per layer: 3n + (n−1).
    pub fn gates_per_layer(&self) -> usize {
        3 * self.num_qubits + (self.num_qubits - 1)
    }

    /// Flat index of `thetas[layer][qubit][comp]`.
    pub fn param_index(&self, layer: usize, qubit: usize, comp: usize) -> usize {
        (layer * self.num_qubits + qubit) * 3 + comp
    }

    /// Gates of one layer: a Rot on every qubit, then CZ on each neighboring
    /// pair (open chain).
    pub fn layer_circuit(&self, layer: usize) -> Vec<Gate> {
        let mut gates = Vec::with_capacity(self.gates_per_layer());
        for q in 0..self.num_qubits {
            gates.push(Gate::Rot {
                wire: q,
                phi: self.thetas[self.param_index(layer, q, 0)],
                theta: self.thetas[self.param_index(layer, q, 1)],
                omega: self.thetas[self.param_index(layer, q, 2)],
            });
        }
        for q in 0..self.num_qubits - 1 {
            gates.push(Gate::Cz { a: q, b: q + 1 });
        }
        gates
    }

    pub fn circuit(&self) -> Vec<Gate> {
        (0..self.num_layers).flat_map(|l| self.layer_circuit(l)).collect()
    }

    pub fn encode_input(&self, x: &PixelVector) -> Result<StateVector> {
        encode(x, self.num_qubits)
    }

    /// Readouts ⟨σᶻ_k⟩ for k < m after the full circuit, plus their softmax.
    pub fn forward(&self, x: &PixelVector) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut state = self.encode_input(x)?;
        state.apply_circuit(&self.circuit())?;
        let readouts: Vec<f64> = (0..self.num_classes)
            .map(|k| state.expectation_z(k))
            .collect::<Result<_>>()?;
        let probs = softmax(&readouts, self.temperature);
        Ok((readouts, probs))
    }

    /// Mean cross-entropy over the batch and its gradient over all angles.
    pub fn loss_and_grads(
        &self,
        images: &[PixelVector],
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        if images.is_empty() || images.len() != labels.len() {
            return Err(Error::Config(format!(
                "batch of {} images with {} labels",
                images.len(),
                labels.len()
            )));
        }
        let circuit = self.circuit();
        let per_example: Vec<(f64, Vec<f64>)> = images
            .par_iter()
            .zip(labels.par_iter())
            .map(|(x, &label)| self.example_loss_and_grads(&circuit, x, label))
            .collect::<Result<_>>()?;
        let scale = 1.0 / images.len() as f64;
        let mut loss = 0.0;
        let mut grads = vec![0.0; self.param_count()];
        for (l, g) in &per_example {
            loss += l * scale;
            for (acc, gi) in grads.iter_mut().zip(g) {
                *acc += gi * scale;
            }
        }
        Ok((loss, grads))
    }

    fn example_loss_and_grads(
        &self,
        circuit: &[Gate],
        x: &PixelVector,
        label: usize,
    ) -> Result<(f64, Vec<f64>)> {
        let input = self.encode_input(x)?;
        let mut state = input.clone();
        state.apply_circuit(circuit)?;
        let readouts: Vec<f64> = (0..self.num_classes)
            .map(|k| state.expectation_z(k))
            .collect::<Result<_>>()?;
        let probs = softmax(&readouts, self.temperature);
        let loss = cross_entropy(&probs, label)?;
        let cot = softmax_ce_cotangents(&probs, label, self.temperature)?;
        let grads = grad::grad_params(circuit, &input, &cot)?;
        Ok((loss, grads))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut header = Map::new();
        header.insert("family".into(), json!("qvc"));
        header.insert("model_id".into(), json!(self.model_id));
        header.insert("num_qubits".into(), json!(self.num_qubits));
        header.insert("num_layers".into(), json!(self.num_layers));
        header.insert("num_classes".into(), json!(self.num_classes));
        header.insert("temperature".into(), json!(self.temperature));
        checkpoint::save(path, &header, &self.thetas)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let ckpt = checkpoint::load(path)?;
        Self::from_checkpoint(&ckpt)
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        if ckpt.field_str("family")? != "qvc" {
            return Err(Error::Format(format!(
                "checkpoint holds a `{}` model, not a qvc",
                ckpt.field_str("family")?
            )));
        }
        let mut model = QvcModel::new(
            ckpt.field_u64("num_qubits")? as usize,
            ckpt.field_u64("num_layers")? as usize,
            ckpt.field_u64("num_classes")? as usize,
        )?
        .with_temperature(ckpt.field_f64("temperature")?)?
        .with_model_id(ckpt.field_str("model_id")?);
        if ckpt.params.len() != model.param_count() {
            return Err(Error::Format(format!(
                "checkpoint has {} parameters, model needs {}",
                ckpt.params.len(),
                model.param_count()
            )));
        }
        model.thetas.copy_from_slice(&ckpt.params);
        Ok(model)
    }
}

impl Classifier for QvcModel {
    fn model_id(&self) -> &str {
        &self.model_id
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn scores(&self, x: &PixelVector) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.0)
    }

    fn probabilities(&self, x: &PixelVector) -> Result<Vec<f64>> {
        Ok(self.forward(x)?.1)
    }

    /// Chain rule end to end: softmax/CE cotangents → adjoint sweep → the
    /// encoding's normalization Jacobian. Only the real amplitude parts feed
    /// back because encoded amplitudes are real.
    fn input_gradient(&self, x: &PixelVector, label: usize) -> Result<Vec<f64>> {
        let input = self.encode_input(x)?;
        let circuit = self.circuit();
        let mut state = input.clone();
        state.apply_circuit(&circuit)?;
        let readouts: Vec<f64> = (0..self.num_classes)
            .map(|k| state.expectation_z(k))
            .collect::<Result<_>>()?;
        let probs = softmax(&readouts, self.temperature);
        let cot = softmax_ce_cotangents(&probs, label, self.temperature)?;
        let g = grad::grad_input(&circuit, &input, &cot)?;
        let amp_cot: Vec<f64> = g.iter().map(|c| c.re).collect();
        encode_vjp(x, &amp_cot)
    }
}

impl Trainable for QvcModel {
    fn params(&self) -> &[f64] {
        &self.thetas
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.thetas
    }

    fn batch_loss_and_grads(
        &self,
        images: &[PixelVector],
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>)> {
        self.loss_and_grads(images, labels)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pixels(values: &[f64]) -> PixelVector {
        PixelVector::new(values.to_vec(), values.len(), 1).unwrap()
    }

    #[test]
    fn zero_layer_model_reads_the_encoded_state() {
        let model = QvcModel::new(2, 0, 2).unwrap();
        let (readouts, probs) = model.forward(&pixels(&[1.0, 0.0, 0.0, 0.0])).unwrap();
        assert!((readouts[0] - 1.0).abs() < 1e-12);
        assert!((readouts[1] - 1.0).abs() < 1e-12);
        assert!((probs[0] - 0.5).abs() < 1e-12);
        assert!((probs[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn all_zero_angles_layer_acts_as_identity_on_ground_state() {
        let shallow = QvcModel::new(4, 1, 3).unwrap();
        let deep = QvcModel::new(4, 0, 3).unwrap();
        let mut x = vec![0.0; 16];
        x[0] = 1.0;
        let a = shallow.forward(&pixels(&x)).unwrap().0;
        let b = deep.forward(&pixels(&x)).unwrap().0;
        for (u, v) in a.iter().zip(&b) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn random_model_readouts_bounded_and_probs_normalized() {
        let model = QvcModel::new(4, 3, 4).unwrap().init_random(3);
        let x = pixels(&[0.1, 0.9, 0.4, 0.2, 0.8, 0.5, 0.3, 0.7]);
        let (readouts, probs) = model.forward(&x).unwrap();
        for r in &readouts {
            assert!(*r >= -1.0 - 1e-12 && *r <= 1.0 + 1e-12);
        }
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn symmetric_input_ties_break_to_class_zero() {
        // (1,0,0,1)/√2 has ⟨σᶻ⟩ = 0 on both qubits.
        let model = QvcModel::new(2, 0, 2).unwrap();
        let x = pixels(&[1.0, 0.0, 0.0, 1.0]);
        let r = model.scores(&x).unwrap();
        assert!((r[0] - r[1]).abs() < 1e-15);
        assert_eq!(model.predict(&x).unwrap(), 0);
    }

    #[test]
    fn parameter_accounting_matches_published_architectures() {
        let qvc200 = QvcModel::new(10, 200, 10).unwrap();
        assert_eq!(qvc200.param_count(), 6000);
        assert_eq!(qvc200.gates_per_layer(), 39);
        let wide = QvcModel::new(12, 200, 10).unwrap();
        assert_eq!(wide.param_count(), 7200);
        let desk = QvcModel::new(6, 20, 4).unwrap();
        assert_eq!(desk.param_count(), 360);
        // A layer holds one fused Rot per qubit plus the CZ chain; expanded
        // to primitive rotations it carries 3n + (n−1) gates.
        assert_eq!(desk.circuit().len(), 20 * (6 + 5));
        assert_eq!(desk.gates_per_layer(), 23);
        assert_eq!(crate::grad::param_count(&desk.circuit()), desk.param_count());
    }

    #[test]
    fn class_count_must_fit_the_register() {
        assert_eq!(QvcModel::new(3, 5, 4).unwrap_err().category(), "config");
    }

    #[test]
    fn uniform_probabilities_cost_ln_m() {
        let model = QvcModel::new(2, 0, 2).unwrap();
        let (loss, grads) = model
            .loss_and_grads(&[pixels(&[1.0, 0.0, 0.0, 0.0])], &[1])
            .unwrap();
        assert!((loss - 2.0_f64.ln()).abs() < 1e-12);
        assert!(grads.is_empty());
    }

    #[test]
    fn batch_gradient_matches_finite_differences() {
        let model = QvcModel::new(3, 2, 2).unwrap().init_random(9);
        let images = vec![
            pixels(&[0.9, 0.1, 0.2, 0.1, 0.0, 0.3, 0.1, 0.2]),
            pixels(&[0.1, 0.2, 0.1, 0.8, 0.7, 0.1, 0.2, 0.1]),
            pixels(&[0.4, 0.4, 0.6, 0.2, 0.3, 0.9, 0.2, 0.5]),
        ];
        let labels = vec![0, 1, 1];
        let (_, grads) = model.loss_and_grads(&images, &labels).unwrap();
        let h = 1e-5;
        for i in 0..model.param_count() {
            let mut plus = model.clone();
            plus.thetas_mut()[i] += h;
            let mut minus = model.clone();
            minus.thetas_mut()[i] -= h;
            let fd = (plus.loss_and_grads(&images, &labels).unwrap().0
                - minus.loss_and_grads(&images, &labels).unwrap().0)
                / (2.0 * h);
            assert!(
                (grads[i] - fd).abs() <= 1e-5 * 1.0_f64.max(fd.abs()),
                "theta {i}: adjoint {} vs fd {fd}",
                grads[i]
            );
        }
    }

    #[test]
    fn input_gradient_matches_finite_differences_through_the_whole_chain() {
        let model = QvcModel::new(3, 2, 3).unwrap().init_random(21);
        let values = vec![0.52, 0.13, 0.95, 0.27, 0.66, 0.08, 0.31, 0.74];
        let x = pixels(&values);
        let label = 2;
        let g = model.input_gradient(&x, label).unwrap();
        assert_eq!(g.len(), values.len());
        let h = 1e-5;
        for i in 0..values.len() {
            let mut plus = values.clone();
            plus[i] += h;
            let mut minus = values.clone();
            minus[i] -= h;
            let fd = (model.loss(&pixels(&plus), label).unwrap()
                - model.loss(&pixels(&minus), label).unwrap())
                / (2.0 * h);
            assert!(
                (g[i] - fd).abs() <= 1e-5 * 1.0_f64.max(fd.abs()),
                "pixel {i}: adjoint {} vs fd {fd}",
                g[i]
            );
        }
    }

    #[test]
    fn predictions_ignore_global_brightness() {
        let model = QvcModel::new(3, 2, 2).unwrap().init_random(33);
        let x = vec![0.8, 0.2, 0.4, 0.9, 0.1, 0.5, 0.7, 0.3];
        let base = model.predict(&pixels(&x)).unwrap();
        for scale in [0.5, 0.25, 0.7] {
            let dimmed: Vec<f64> = x.iter().map(|v| v * scale).collect();
            assert_eq!(model.predict(&pixels(&dimmed)).unwrap(), base);
        }
    }

    #[test]
    fn small_gradient_steps_decrease_training_loss() {
        // Left-heavy images are class 0, right-heavy class 1.
        let mut images = Vec::new();
        let mut labels = Vec::new();
        for i in 0..20 {
            let t = i as f64 / 19.0 * 0.3;
            if i % 2 == 0 {
                images.push(pixels(&[0.9 - t, 0.8, 0.7, 0.6, 0.1, 0.2 + t, 0.1, 0.0]));
                labels.push(0);
            } else {
                images.push(pixels(&[0.1, 0.2, 0.1 + t, 0.0, 0.9, 0.8 - t, 0.7, 0.6]));
                labels.push(1);
            }
        }
        let mut model = QvcModel::new(3, 2, 2).unwrap().init_random(5);
        let (mut last, mut grads) = model.loss_and_grads(&images, &labels).unwrap();
        for step in 0..10 {
            for (t, g) in model.thetas_mut().iter_mut().zip(&grads) {
                *t -= 0.05 * g;
            }
            let (loss, next) = model.loss_and_grads(&images, &labels).unwrap();
            assert!(loss < last, "loss rose at step {step}: {last} -> {loss}");
            last = loss;
            grads = next;
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("qvc.qckp");
        let model = QvcModel::new(4, 3, 3)
            .unwrap()
            .init_random(77)
            .with_temperature(0.7)
            .unwrap()
            .with_model_id("qvc-test");
        model.save(&path).unwrap();
        let loaded = QvcModel::load(&path).unwrap();
        assert_eq!(loaded.model_id(), "qvc-test");
        assert_eq!(loaded.num_qubits(), 4);
        assert_eq!(loaded.temperature(), 0.7);
        for (a, b) in loaded.thetas().iter().zip(model.thetas()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}
