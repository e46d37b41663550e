//! Adam, softmax, and cross-entropy — the trainer pieces shared by the
//! quantum and classical models.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Probabilities below this are clamped before the log in [`cross_entropy`].
pub const LOG_FLOOR: f64 = 1e-12;

/// Adam hyperparameters. Defaults are the standard lr=1e-3, β=(0.9, 0.999).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams { lr: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Adam moment buffers for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState {
    hyper: AdamParams,
    t: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(num_params: usize, hyper: AdamParams) -> Self {
        AdamState { hyper, t: 0, m: vec![0.0; num_params], v: vec![0.0; num_params] }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update, in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::Config(format!(
                "adam state sized for {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        self.t += 1;
        let AdamParams { lr, beta1, beta2, epsilon } = self.hyper;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = beta1 * self.m[i] + (1.0 - beta1) * g;
            self.v[i] = beta2 * self.v[i] + (1.0 - beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
        Ok(())
    }
}

/// Numerically stable softmax of `scores / temperature`.
pub fn softmax(scores: &[f64], temperature: f64) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| ((s - max) / temperature).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

/// `−log(max(probs[label], 1e-12))`.
pub fn cross_entropy(probs: &[f64], label: usize) -> Result<f64> {
    if label >= probs.len() {
        return Err(Error::Data(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(-probs[label].max(LOG_FLOOR).ln())
}

/// Gradient of `cross_entropy(softmax(scores / T), label)` with respect to
/// the raw scores: `(probs − onehot(label)) / T`.
pub fn softmax_ce_cotangents(probs: &[f64], label: usize, temperature: f64) -> Result<Vec<f64>> {
    if label >= probs.len() {
        return Err(Error::Data(format!(
            "label {label} out of range for {} classes",
            probs.len()
        )));
    }
    Ok(probs
        .iter()
        .enumerate()
        .map(|(k, p)| (p - if k == label { 1.0 } else { 0.0 }) / temperature)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_parameters_alone() {
        let mut params = vec![0.4, -1.2, 3.0];
        let mut state = AdamState::new(3, AdamParams::default());
        state.step(&mut params, &[0.0, 0.0, 0.0]).unwrap();
        assert_eq!(params, vec![0.4, -1.2, 3.0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn first_step_update_is_lr_scaled_sign_like() {
        // Bias correction cancels at t=1: Δ = −lr·g/(|g|+ε).
        let hyper = AdamParams::default();
        let g = [0.25, -3.0];
        let mut params = vec![1.0, 1.0];
        let mut state = AdamState::new(2, hyper);
        state.step(&mut params, &g).unwrap();
        for (i, &gi) in g.iter().enumerate() {
            let expected = 1.0 - hyper.lr * gi / (gi.abs() + hyper.epsilon);
            assert!((params[i] - expected).abs() < 1e-15, "param {i}");
        }
    }

    #[test]
    fn constant_gradient_steps_approach_lr_sign() {
        let hyper = AdamParams::default();
        for &g in &[0.01, 1.0, 100.0] {
            let mut params = vec![0.0];
            let mut state = AdamState::new(1, hyper);
            for _ in 0..200 {
                state.step(&mut params, &[g]).unwrap();
            }
            for _ in 0..3 {
                let prev = params[0];
                state.step(&mut params, &[g]).unwrap();
                let delta = params[0] - prev;
                assert!(
                    (delta + hyper.lr).abs() < 1e-5 * hyper.lr,
                    "step for g={g} was {delta}, expected −lr"
                );
            }
        }
    }

    #[test]
    fn shape_mismatch_is_config_error() {
        let mut params = vec![0.0; 3];
        let mut state = AdamState::new(2, AdamParams::default());
        assert_eq!(
            state.step(&mut params, &[0.0; 3]).unwrap_err().category(),
            "config"
        );
    }

    #[test]
    fn softmax_normalizes_and_preserves_argmax() {
        let scores = [0.3, -1.0, 2.5, 2.4];
        let probs = softmax(&scores, 1.0);
        assert!((probs.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(probs.iter().all(|p| *p > 0.0));
        let argmax = |v: &[f64]| {
            v.iter()
                .enumerate()
                .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
                .unwrap()
                .0
        };
        assert_eq!(argmax(&probs), argmax(&scores));
    }

    #[test]
    fn softmax_of_equal_scores_is_uniform() {
        let probs = softmax(&[0.7, 0.7, 0.7, 0.7], 1.0);
        for p in probs {
            assert!((p - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn high_temperature_flattens_softmax() {
        let scores = [1.0, -1.0];
        let hot = softmax(&scores, 100.0);
        let cold = softmax(&scores, 0.1);
        assert!(hot[0] - hot[1] < 0.05);
        assert!(cold[0] > 0.999);
    }

    #[test]
    fn cross_entropy_known_values() {
        assert_eq!(cross_entropy(&[1.0, 0.0], 0).unwrap(), 0.0);
        let uniform = vec![0.1; 10];
        assert!((cross_entropy(&uniform, 3).unwrap() - 10.0_f64.ln()).abs() < 1e-12);
        let tiny = cross_entropy(&[1e-20, 1.0 - 1e-20], 0).unwrap();
        assert!((tiny - (-LOG_FLOOR.ln())).abs() < 1e-12);
        assert_eq!(cross_entropy(&[0.5, 0.5], 2).unwrap_err().category(), "data");
    }

    #[test]
    fn cross_entropy_decreases_as_label_probability_grows() {
        let mut last = f64::INFINITY;
        for p in [0.1, 0.3, 0.5, 0.9, 0.99] {
            let loss = cross_entropy(&[p, 1.0 - p], 0).unwrap();
            assert!(loss < last);
            last = loss;
        }
    }

    #[test]
    fn ce_cotangents_match_finite_differences() {
        let scores = [0.4, -0.9, 1.7];
        let label = 2;
        for &temp in &[1.0, 2.5] {
            let probs = softmax(&scores, temp);
            let cot = softmax_ce_cotangents(&probs, label, temp).unwrap();
            let h = 1e-6;
            for i in 0..scores.len() {
                let mut plus = scores;
                plus[i] += h;
                let mut minus = scores;
                minus[i] -= h;
                let fd = (cross_entropy(&softmax(&plus, temp), label).unwrap()
                    - cross_entropy(&softmax(&minus, temp), label).unwrap())
                    / (2.0 * h);
                assert!((cot[i] - fd).abs() < 1e-8, "score {i} at T={temp}");
            }
        }
    }
}
