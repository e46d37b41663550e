//! Quantum noise channels during QVC evaluation.
//!
//! Channels act after every layer on every qubit. At scale they run as Monte
//! Carlo trajectories (one Kraus branch per qubit, Born-rule sampled); for
//! five qubits or fewer an exact density-matrix evolution serves as the
//! oracle the trajectories are checked against.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classifier::{argmax, Classifier};
use crate::encoding::PixelVector;
use crate::error::{Error, Result};
use crate::qvc::QvcModel;
use crate::sim::{Gate, StateVector};

/// Largest register the exact density-matrix oracle will take (4^n memory).
pub const DENSITY_MATRIX_MAX_QUBITS: usize = 5;

/// A single-qubit noise channel with one strength knob.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseModel {
    /// Pauli twirl {I, X, Y, Z} with probabilities {1−3p/4, p/4, p/4, p/4};
    /// equivalently: replace the qubit with the maximally mixed state with
    /// probability p.
    Depolarizing { p: f64 },
    /// Energy relaxation toward |0⟩ with rate γ.
    AmplitudeDamping { gamma: f64 },
    /// Apply X with probability p.
    BitFlip { p: f64 },
}

impl NoiseModel {
    pub fn depolarizing(p: f64) -> Result<Self> {
        check_unit(p, "depolarizing probability")?;
        Ok(NoiseModel::Depolarizing { p })
    }

    pub fn amplitude_damping(gamma: f64) -> Result<Self> {
        check_unit(gamma, "damping rate")?;
        Ok(NoiseModel::AmplitudeDamping { gamma })
    }

    pub fn bit_flip(p: f64) -> Result<Self> {
        check_unit(p, "bit-flip probability")?;
        Ok(NoiseModel::BitFlip { p })
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            NoiseModel::Depolarizing { .. } => "depolarizing",
            NoiseModel::AmplitudeDamping { .. } => "amplitude-damping",
            NoiseModel::BitFlip { .. } => "bit-flip",
        }
    }

    pub fn strength(&self) -> f64 {
        match *self {
            NoiseModel::Depolarizing { p } | NoiseModel::BitFlip { p } => p,
            NoiseModel::AmplitudeDamping { gamma } => gamma,
        }
    }

    pub fn is_zero_strength(&self) -> bool {
        self.strength() == 0.0
    }

    /// With a fresh strength, same kind.
    pub fn with_strength(&self, strength: f64) -> Result<Self> {
        match self {
            NoiseModel::Depolarizing { .. } => NoiseModel::depolarizing(strength),
            NoiseModel::AmplitudeDamping { .. } => NoiseModel::amplitude_damping(strength),
            NoiseModel::BitFlip { .. } => NoiseModel::bit_flip(strength),
        }
    }

    /// Kraus operators as 2×2 matrices `[m00, m01, m10, m11]`.
    pub fn kraus(&self) -> Vec<[Complex64; 4]> {
        let re = |v: f64| Complex64::new(v, 0.0);
        let zero = re(0.0);
        match *self {
            NoiseModel::BitFlip { p } => vec![
                [re((1.0 - p).sqrt()), zero, zero, re((1.0 - p).sqrt())],
                [zero, re(p.sqrt()), re(p.sqrt()), zero],
            ],
            NoiseModel::AmplitudeDamping { gamma } => vec![
                [re(1.0), zero, zero, re((1.0 - gamma).sqrt())],
                [zero, re(gamma.sqrt()), zero, zero],
            ],
            NoiseModel::Depolarizing { p } => {
                let stay = (1.0 - 3.0 * p / 4.0).sqrt();
                let kick = (p / 4.0).sqrt();
                vec![
                    [re(stay), zero, zero, re(stay)],
                    [zero, re(kick), re(kick), zero],
                    [
                        zero,
                        Complex64::new(0.0, -kick),
                        Complex64::new(0.0, kick),
                        zero,
                    ],
                    [re(kick), zero, zero, re(-kick)],
                ]
            }
        }
    }
}

fn check_unit(v: f64, what: &str) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Config(format!("{what} {v} outside [0, 1]")));
    }
    Ok(())
}

/// Squared norm of `K|ψ⟩` restricted to one qubit — the Born probability of
/// that Kraus branch.
fn branch_probability(state: &StateVector, wire: usize, m: &[Complex64; 4]) -> f64 {
    let amps = state.amplitudes();
    let stride = 1usize << wire;
    let block = stride << 1;
    let mut total = 0.0;
    let mut base = 0;
    while base < amps.len() {
        for i in base..base + stride {
            let a = amps[i];
            let b = amps[i + stride];
            total += (m[0] * a + m[1] * b).norm_sqr() + (m[2] * a + m[3] * b).norm_sqr();
        }
        base += block;
    }
    total
}

/// Sample one Kraus branch on `wire` with Born-rule probabilities, apply it,
/// and renormalize.
pub fn apply_channel_trajectory(
    state: &mut StateVector,
    noise: &NoiseModel,
    wire: usize,
    rng: &mut ChaCha8Rng,
) -> Result<()> {
    if wire >= state.num_qubits() {
        return Err(Error::Config(format!(
            "noise on qubit {wire} of a {}-qubit register",
            state.num_qubits()
        )));
    }
    if noise.is_zero_strength() {
        return Ok(());
    }
    let kraus = noise.kraus();
    let probs: Vec<f64> = kraus.iter().map(|m| branch_probability(state, wire, m)).collect();
    let total: f64 = probs.iter().sum();
    let mut draw = rng.gen::<f64>() * total;
    let mut chosen = kraus.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        if draw < *p {
            chosen = i;
            break;
        }
        draw -= p;
    }
    state.apply_single(wire, kraus[chosen]);
    state.renormalize();
    Ok(())
}

/// One noisy trajectory of the full model: layer, then noise on every qubit.
pub fn noisy_readouts(
    model: &QvcModel,
    x: &PixelVector,
    noise: &NoiseModel,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<f64>> {
    let mut state = model.encode_input(x)?;
    for layer in 0..model.num_layers() {
        state.apply_circuit(&model.layer_circuit(layer))?;
        for wire in 0..model.num_qubits() {
            apply_channel_trajectory(&mut state, noise, wire, rng)?;
        }
    }
    (0..model.num_classes()).map(|k| state.expectation_z(k)).collect()
}

fn readout_mean_with_streams(
    model: &QvcModel,
    x: &PixelVector,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
    base_stream: u64,
) -> Result<Vec<f64>> {
    if trajectories == 0 {
        return Err(Error::Config("need at least one trajectory".into()));
    }
    if noise.is_zero_strength() {
        // Exact fast path: a zero-strength channel is the identity, so the
        // mean over any number of trajectories is the clean forward pass.
        return Ok(model.forward(x)?.0);
    }
    let per_traj: Vec<Vec<f64>> = (0..trajectories)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(base_stream + t as u64);
            noisy_readouts(model, x, noise, &mut rng)
        })
        .collect::<Result<_>>()?;
    let mut mean = vec![0.0; model.num_classes()];
    let scale = 1.0 / trajectories as f64;
    for readouts in &per_traj {
        for (m, r) in mean.iter_mut().zip(readouts) {
            *m += r * scale;
        }
    }
    Ok(mean)
}

/// Trajectory-averaged readouts; stream `t` of `seed` drives trajectory `t`.
pub fn noisy_readouts_mean(
    model: &QvcModel,
    x: &PixelVector,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    readout_mean_with_streams(model, x, noise, trajectories, seed, 0)
}

/// Argmax of the trajectory-averaged readouts.
pub fn noisy_predict(
    model: &QvcModel,
    x: &PixelVector,
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
) -> Result<usize> {
    Ok(argmax(&noisy_readouts_mean(model, x, noise, trajectories, seed)?))
}

/// Accuracy under noise. Each (image, trajectory) pair gets its own RNG
/// stream, so results are independent of scheduling.
pub fn noisy_accuracy(
    model: &QvcModel,
    images: &[PixelVector],
    labels: &[usize],
    noise: &NoiseModel,
    trajectories: usize,
    seed: u64,
) -> Result<f64> {
    if images.is_empty() || images.len() != labels.len() {
        return Err(Error::Config(format!(
            "{} images with {} labels",
            images.len(),
            labels.len()
        )));
    }
    let hits: Vec<bool> = (0..images.len())
        .into_par_iter()
        .map(|i| {
            let mean = readout_mean_with_streams(
                model,
                &images[i],
                noise,
                trajectories,
                seed,
                (i * trajectories) as u64,
            )?;
            Ok(argmax(&mean) == labels[i])
        })
        .collect::<Result<_>>()?;
    Ok(hits.iter().filter(|h| **h).count() as f64 / images.len() as f64)
}

/// One row of the noise sweep table.
#[derive(Debug, Clone)]
pub struct NoiseSweepRow {
    pub noise_kind: String,
    pub strength: f64,
    pub trajectories: usize,
    pub accuracy: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Accuracy per channel configuration, with a normal-approximation binomial
/// interval over the evaluation examples.
pub fn noisy_accuracy_sweep(
    model: &QvcModel,
    images: &[PixelVector],
    labels: &[usize],
    grid: &[NoiseModel],
    trajectories: usize,
    seed: u64,
) -> Result<Vec<NoiseSweepRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for noise in grid {
        let accuracy = noisy_accuracy(model, images, labels, noise, trajectories, seed)?;
        let n = images.len() as f64;
        let half = 1.96 * (accuracy * (1.0 - accuracy) / n).sqrt();
        rows.push(NoiseSweepRow {
            noise_kind: noise.kind_label().to_string(),
            strength: noise.strength(),
            trajectories,
            accuracy,
            ci_low: (accuracy - half).max(0.0),
            ci_high: (accuracy + half).min(1.0),
        });
    }
    Ok(rows)
}

/// Exact density operator on ≤ 5 qubits, stored dense row-major.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    num_qubits: usize,
    dim: usize,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn from_state(state: &StateVector) -> Result<Self> {
        let n = state.num_qubits();
        if n > DENSITY_MATRIX_MAX_QUBITS {
            return Err(Error::Capacity(format!(
                "density matrix oracle capped at {DENSITY_MATRIX_MAX_QUBITS} qubits, got {n}"
            )));
        }
        let dim = 1usize << n;
        let amps = state.amplitudes();
        let mut rho = vec![Complex64::new(0.0, 0.0); dim * dim];
        for r in 0..dim {
            for c in 0..dim {
                rho[r * dim + c] = amps[r] * amps[c].conj();
            }
        }
        Ok(DensityMatrix { num_qubits: n, dim, rho })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// ρ → UρU† for one gate.
    pub fn apply_gate(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        if let (Some(m), Some(wire)) = (gate.single_qubit_matrix(), gate.wire()) {
            self.left_mul(wire, &m);
            self.right_mul_dagger(wire, &m);
            return Ok(());
        }
        // CZ: diagonal ±1, conjugation flips sign where exactly one side
        // carries the |11⟩ pattern.
        if let Gate::Cz { a, b } = *gate {
            let mask = (1usize << a) | (1usize << b);
            for r in 0..self.dim {
                for c in 0..self.dim {
                    let sr = r & mask == mask;
                    let sc = c & mask == mask;
                    if sr != sc {
                        self.rho[r * self.dim + c] = -self.rho[r * self.dim + c];
                    }
                }
            }
        }
        Ok(())
    }

    /// Left-multiply by a single-qubit matrix on `wire`.
    fn left_mul(&mut self, wire: usize, m: &[Complex64; 4]) {
        let stride = 1usize << wire;
        for c in 0..self.dim {
            let mut r0 = 0;
            while r0 < self.dim {
                if r0 & stride == 0 {
                    let r1 = r0 | stride;
                    let x = self.rho[r0 * self.dim + c];
                    let y = self.rho[r1 * self.dim + c];
                    self.rho[r0 * self.dim + c] = m[0] * x + m[1] * y;
                    self.rho[r1 * self.dim + c] = m[2] * x + m[3] * y;
                }
                r0 += 1;
            }
        }
    }

    /// Right-multiply by the dagger of a single-qubit matrix on `wire`.
    fn right_mul_dagger(&mut self, wire: usize, m: &[Complex64; 4]) {
        let stride = 1usize << wire;
        for r in 0..self.dim {
            let row = r * self.dim;
            let mut c0 = 0;
            while c0 < self.dim {
                if c0 & stride == 0 {
                    let c1 = c0 | stride;
                    let x = self.rho[row + c0];
                    let y = self.rho[row + c1];
                    self.rho[row + c0] = x * m[0].conj() + y * m[1].conj();
                    self.rho[row + c1] = x * m[2].conj() + y * m[3].conj();
                }
                c0 += 1;
            }
        }
    }

    /// ρ → Σᵢ KᵢρKᵢ† on one qubit.
    pub fn apply_channel(&mut self, noise: &NoiseModel, wire: usize) -> Result<()> {
        if wire >= self.num_qubits {
            return Err(Error::Config(format!(
                "noise on qubit {wire} of a {}-qubit register",
                self.num_qubits
            )));
        }
        if noise.is_zero_strength() {
            return Ok(());
        }
        let mut sum = vec![Complex64::new(0.0, 0.0); self.rho.len()];
        for m in noise.kraus() {
            let mut branch = self.clone();
            branch.left_mul(wire, &m);
            branch.right_mul_dagger(wire, &m);
            for (s, b) in sum.iter_mut().zip(&branch.rho) {
                *s += b;
            }
        }
        self.rho = sum;
        Ok(())
    }

    /// Whole-state depolarizing: ρ → (1−p)ρ + p·I/2ⁿ.
    pub fn apply_global_depolarizing(&mut self, p: f64) -> Result<()> {
        check_unit(p, "depolarizing probability")?;
        let mixed = p / self.dim as f64;
        for r in 0..self.dim {
            for c in 0..self.dim {
                let v = &mut self.rho[r * self.dim + c];
                *v *= 1.0 - p;
                if r == c {
                    *v += mixed;
                }
            }
        }
        Ok(())
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.rho[i * self.dim + i]).sum()
    }

    /// tr(σᶻ_k ρ), real by construction.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Config(format!(
                "qubit {qubit} out of range for {}-qubit register",
                self.num_qubits
            )));
        }
        let mask = 1usize << qubit;
        let mut total = 0.0;
        for i in 0..self.dim {
            let d = self.rho[i * self.dim + i].re;
            if i & mask == 0 {
                total += d;
            } else {
                total -= d;
            }
        }
        Ok(total)
    }
}

/// Exact noisy readouts: evolve ρ through the layers with the channel after
/// each one, then read ⟨σᶻ⟩ on the first `num_readouts` qubits. Oracle for
/// the trajectory sampler; capped at 5 qubits.
pub fn density_matrix_reference(
    layers: &[Vec<Gate>],
    noise: &NoiseModel,
    input: &StateVector,
    num_readouts: usize,
) -> Result<Vec<f64>> {
    let mut rho = DensityMatrix::from_state(input)?;
    for layer in layers {
        for gate in layer {
            rho.apply_gate(gate)?;
        }
        for wire in 0..input.num_qubits() {
            rho.apply_channel(noise, wire)?;
        }
    }
    (0..num_readouts).map(|k| rho.expectation_z(k)).collect()
}

/// The QVC's noisy readouts via the exact oracle.
pub fn noisy_readouts_reference(
    model: &QvcModel,
    x: &PixelVector,
    noise: &NoiseModel,
) -> Result<Vec<f64>> {
    let layers: Vec<Vec<Gate>> =
        (0..model.num_layers()).map(|l| model.layer_circuit(l)).collect();
    density_matrix_reference(&layers, noise, &model.encode_input(x)?, model.num_classes())
}
