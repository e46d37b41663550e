//! Amplitude encoding: pixel vectors become quantum states.
//!
//! An image is flattened row-major, zero-padded to length 2^n, and divided by
//! its l2 norm, so pixel (r, c) of a w-wide image lands on basis index
//! `r·w + c`. The normalization makes encoding scale-invariant, which is why
//! a global brightness change never moves any downstream prediction.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::StateVector;

/// A flattened grayscale image with intensities in [0, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct PixelVector {
    values: Vec<f64>,
    width: usize,
    height: usize,
}

impl PixelVector {
    pub fn new(values: Vec<f64>, width: usize, height: usize) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::Data(format!(
                "{} pixel values for a {width}x{height} image",
                values.len()
            )));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite() || **v < 0.0 || **v > 1.0) {
            return Err(Error::Data(format!("pixel intensity {bad} outside [0, 1]")));
        }
        Ok(PixelVector { values, width, height })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// l2 norm of the raw intensities.
    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// Encode pixels as state amplitudes: zero-pad to 2^n, then l2-normalize.
pub fn encode(x: &PixelVector, num_qubits: usize) -> Result<StateVector> {
    let dim = 1usize
        .checked_shl(num_qubits as u32)
        .filter(|_| num_qubits >= 1 && num_qubits <= 30)
        .ok_or_else(|| Error::Capacity(format!("cannot encode into {num_qubits} qubits")))?;
    if x.len() > dim {
        return Err(Error::Capacity(format!(
            "{} pixels do not fit in {num_qubits} qubits (2^{num_qubits} = {dim} amplitudes)",
            x.len()
        )));
    }
    let norm = x.norm();
    if norm <= 0.0 {
        return Err(Error::DegenerateInput(
            "all-zero image has no direction to encode".into(),
        ));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for (a, &v) in amps.iter_mut().zip(&x.values) {
        *a = Complex64::new(v / norm, 0.0);
    }
    Ok(StateVector::from_amplitudes_unchecked(num_qubits, amps))
}

/// Pull an amplitude cotangent back through [`encode`]: returns Jᵀ·Δ where
/// J = (I − x̂x̂ᵀ)/‖x‖ is the normalization Jacobian restricted to the pixel
/// block. Cotangent entries past `x.len()` sit on constant zero padding and
/// drop out.
pub fn encode_vjp(x: &PixelVector, amplitude_cotangent: &[f64]) -> Result<Vec<f64>> {
    if amplitude_cotangent.len() < x.len() {
        return Err(Error::Config(format!(
            "cotangent has {} entries for {} pixels",
            amplitude_cotangent.len(),
            x.len()
        )));
    }
    let norm = x.norm();
    if norm <= 0.0 {
        return Err(Error::DegenerateInput(
            "all-zero image has no direction to encode".into(),
        ));
    }
    let radial: f64 = x
        .values
        .iter()
        .zip(amplitude_cotangent)
        .map(|(v, c)| v * c)
        .sum::<f64>()
        / norm;
    Ok(x.values
        .iter()
        .zip(amplitude_cotangent)
        .map(|(v, c)| (c - v / norm * radial) / norm)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn pixels(values: &[f64]) -> PixelVector {
        PixelVector::new(values.to_vec(), values.len(), 1).unwrap()
    }

    #[test]
    fn single_lit_pixel_encodes_to_ground_state() {
        let s = encode(&pixels(&[1.0, 0.0, 0.0, 0.0]), 2).unwrap();
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn three_four_pixel_pair_normalizes_by_five() {
        let s = encode(&pixels(&[0.3, 0.4]), 2).unwrap();
        let a = s.amplitudes();
        assert!((a[0].re - 0.6).abs() < 1e-15);
        assert!((a[1].re - 0.8).abs() < 1e-15);
        assert_eq!(a[2], Complex64::new(0.0, 0.0));
        assert_eq!(a[3], Complex64::new(0.0, 0.0));
    }

    #[test]
    fn mnist_sized_image_pads_into_ten_qubits() {
        let values: Vec<f64> = (0..784).map(|i| (i % 7) as f64 / 10.0).collect();
        let x = PixelVector::new(values, 28, 28).unwrap();
        let s = encode(&x, 10).unwrap();
        assert_eq!(s.num_qubits(), 10);
        assert!(s.amplitudes()[784..].iter().all(|a| a.norm() == 0.0));
        assert!((s.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn all_zero_image_is_degenerate() {
        let err = encode(&pixels(&[0.0, 0.0]), 1).unwrap_err();
        assert_eq!(err.category(), "degenerate-input");
    }

    #[test]
    fn too_many_pixels_is_capacity_error() {
        let err = encode(&pixels(&[0.5; 5]), 2).unwrap_err();
        assert_eq!(err.category(), "capacity");
    }

    #[test]
    fn pixel_vector_rejects_out_of_range_and_shape_mismatch() {
        assert_eq!(
            PixelVector::new(vec![0.5, 1.5], 2, 1).unwrap_err().category(),
            "data"
        );
        assert_eq!(
            PixelVector::new(vec![0.5, 0.5, 0.5], 2, 1).unwrap_err().category(),
            "data"
        );
    }

    #[test]
    fn encoding_is_scale_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let values: Vec<f64> = (0..16).map(|_| rng.gen_range(0.0..1.0)).collect();
            let scale = rng.gen_range(0.01..1.0);
            let scaled: Vec<f64> = values.iter().map(|v| v * scale).collect();
            let a = encode(&pixels(&values), 4).unwrap();
            let b = encode(&pixels(&scaled), 4).unwrap();
            for (x, y) in a.amplitudes().iter().zip(b.amplitudes()) {
                assert!((x - y).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn radial_cotangent_is_annihilated() {
        let x = pixels(&[0.3, 0.4]);
        let g = encode_vjp(&x, &[0.6, 0.8]).unwrap();
        assert!(g.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn vjp_at_unit_axis_input_is_hand_checkable() {
        // At x = (1, 0): J = (I − x̂x̂ᵀ)/‖x‖ = diag(0, 1), so Jᵀ(0,1) = (0,1).
        let g = encode_vjp(&pixels(&[1.0, 0.0]), &[0.0, 1.0]).unwrap();
        assert!((g[0] - 0.0).abs() < 1e-15);
        assert!((g[1] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn vjp_matches_finite_differences_of_encode() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let h = 1e-6;
        for _ in 0..20 {
            let values: Vec<f64> = (0..12).map(|_| rng.gen_range(0.05..0.95)).collect();
            let x = PixelVector::new(values.clone(), 12, 1).unwrap();
            let cot: Vec<f64> = (0..16).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let g = encode_vjp(&x, &cot).unwrap();

            // Scalar probe f(x) = Σ_j cot_j · a_j(x), differentiated per pixel.
            let f = |vals: &[f64]| {
                let p = PixelVector::new(vals.to_vec(), 12, 1).unwrap();
                encode(&p, 4)
                    .unwrap()
                    .amplitudes()
                    .iter()
                    .zip(&cot)
                    .map(|(a, c)| a.re * c)
                    .sum::<f64>()
            };
            for i in 0..12 {
                let mut plus = values.clone();
                plus[i] += h;
                let mut minus = values.clone();
                minus[i] -= h;
                let fd = (f(&plus) - f(&minus)) / (2.0 * h);
                assert!(
                    (g[i] - fd).abs() < 1e-6 * 1.0_f64.max(fd.abs()),
                    "pixel {i}: vjp {} vs fd {fd}",
                    g[i]
                );
            }
        }
    }

    #[test]
    fn vjp_output_is_orthogonal_to_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(29);
        for _ in 0..50 {
            let values: Vec<f64> = (0..10).map(|_| rng.gen_range(0.0..1.0)).collect();
            let x = PixelVector::new(values.clone(), 10, 1).unwrap();
            let cot: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let g = encode_vjp(&x, &cot).unwrap();
            let dot: f64 = g.iter().zip(&values).map(|(a, b)| a * b).sum();
            assert!(dot.abs() < 1e-9, "projector leaked a radial component: {dot}");
        }
    }
}
