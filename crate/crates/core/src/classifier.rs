//! The model interface attacks and the harness work against.

use crate::encoding::PixelVector;
use crate::error::Result;
use crate::optim::{cross_entropy, softmax};

/// Anything that scores images and can say how its loss moves with the input.
///
/// `scores` are the pre-softmax outputs (Z readouts for the quantum model,
/// logits for the classical ones); `predict` is their argmax with ties broken
/// toward the lowest class index.
pub trait Classifier: Send + Sync {
    /// Stable identifier used in manifests, CSV rows, and file names.
    fn model_id(&self) -> &str;

    fn num_classes(&self) -> usize;

    fn scores(&self, x: &PixelVector) -> Result<Vec<f64>>;

    /// Class probabilities; default is softmax of the scores at T=1.
    fn probabilities(&self, x: &PixelVector) -> Result<Vec<f64>> {
        Ok(softmax(&self.scores(x)?, 1.0))
    }

    fn predict(&self, x: &PixelVector) -> Result<usize> {
        Ok(argmax(&self.scores(x)?))
    }

    /// Cross-entropy of the predicted probabilities at `label`.
    fn loss(&self, x: &PixelVector, label: usize) -> Result<f64> {
        cross_entropy(&self.probabilities(x)?, label)
    }

    /// d(loss)/d(pixel) at `(x, label)`, one entry per pixel.
    fn input_gradient(&self, x: &PixelVector, label: usize) -> Result<Vec<f64>>;
}

/// A classifier the shared trainer can drive: flat parameters plus batch
/// gradients of the mean cross-entropy.
pub trait Trainable: Classifier {
    fn params(&self) -> &[f64];

    fn params_mut(&mut self) -> &mut [f64];

    /// Mean loss over the batch and its gradient over every parameter.
    fn batch_loss_and_grads(
        &self,
        images: &[PixelVector],
        labels: &[usize],
    ) -> Result<(f64, Vec<f64>)>;
}

/// Index of the largest entry; the first one wins on ties.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_breaks_ties_toward_lowest_index() {
        assert_eq!(argmax(&[1.0, -1.0]), 0);
        assert_eq!(argmax(&[-0.2, -0.2]), 0);
        assert_eq!(argmax(&[0.1, 0.4, 0.4, 0.2]), 1);
        assert_eq!(argmax(&[-3.0]), 0);
    }

    struct Stub;

    impl Classifier for Stub {
        fn model_id(&self) -> &str {
            "stub"
        }
        fn num_classes(&self) -> usize {
            2
        }
        fn scores(&self, _x: &PixelVector) -> Result<Vec<f64>> {
            Ok(vec![0.0, 0.0])
        }
        fn input_gradient(&self, _x: &PixelVector, _label: usize) -> Result<Vec<f64>> {
            Ok(vec![0.0])
        }
    }

    #[test]
    fn default_loss_of_equal_scores_is_ln_num_classes() {
        let x = PixelVector::new(vec![1.0], 1, 1).unwrap();
        let loss = Stub.loss(&x, 1).unwrap();
        assert!((loss - 2.0_f64.ln()).abs() < 1e-12);
        assert_eq!(Stub.predict(&x).unwrap(), 0);
    }
}
