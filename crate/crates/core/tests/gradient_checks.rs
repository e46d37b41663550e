//! End-to-end gradient validation: the adjoint engine against two
//! independent oracles (parameter-shift and central finite differences)
//! over randomized circuits, and through the full model stacks.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qadv_core::classical::{ClassicalModel, ClassicalSpec};
use qadv_core::classifier::Classifier;
use qadv_core::encoding::PixelVector;
use qadv_core::grad;
use qadv_core::qvc::QvcModel;
use qadv_core::sim::{Gate, StateVector};

fn random_circuit(rng: &mut ChaCha8Rng, num_qubits: usize, len: usize) -> Vec<Gate> {
    (0..len)
        .map(|_| {
            let q = rng.gen_range(0..num_qubits);
            match rng.gen_range(0..4) {
                0 => Gate::Rz { wire: q, angle: rng.gen_range(-3.0..3.0) },
                1 => Gate::Ry { wire: q, angle: rng.gen_range(-3.0..3.0) },
                2 => Gate::Rot {
                    wire: q,
                    phi: rng.gen_range(-3.0..3.0),
                    theta: rng.gen_range(-3.0..3.0),
                    omega: rng.gen_range(-3.0..3.0),
                },
                _ => {
                    let other = (q + 1 + rng.gen_range(0..num_qubits - 1)) % num_qubits;
                    Gate::Cz { a: q.min(other), b: q.max(other) }
                }
            }
        })
        .collect()
}

fn random_state(rng: &mut ChaCha8Rng, num_qubits: usize) -> StateVector {
    let dim = 1usize << num_qubits;
    let mut amps: Vec<Complex64> = (0..dim)
        .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
        .collect();
    let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    for a in &mut amps {
        *a /= norm;
    }
    StateVector::from_amplitudes(num_qubits, amps).unwrap()
}

#[test]
fn adjoint_matches_parameter_shift_and_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    for trial in 0..100 {
        let num_qubits = rng.gen_range(2..=5);
        let circuit_len = rng.gen_range(3..12);
        let circuit = random_circuit(&mut rng, num_qubits, circuit_len);
        let input = random_state(&mut rng, num_qubits);
        let weights: Vec<f64> = (0..num_qubits).map(|_| rng.gen_range(-1.0..1.0)).collect();

        let grads = grad::grad(&circuit, &input, &weights).unwrap();
        let n_params = grad::param_count(&circuit);
        assert_eq!(grads.params.len(), n_params);

        for j in 0..n_params {
            let shift = grad::param_shift_check(&circuit, &input, &weights, j).unwrap();
            assert!(
                (grads.params[j] - shift).abs() <= 1e-9,
                "trial {trial} param {j}: adjoint {} vs parameter-shift {shift}",
                grads.params[j]
            );

            let h = 1e-5;
            let plus = grad::eval_loss(
                &grad::shift_param(&circuit, j, h).unwrap(),
                &input,
                &weights,
            )
            .unwrap();
            let minus = grad::eval_loss(
                &grad::shift_param(&circuit, j, -h).unwrap(),
                &input,
                &weights,
            )
            .unwrap();
            let fd = (plus - minus) / (2.0 * h);
            let tol = 1e-6 * (1.0 + fd.abs());
            assert!(
                (grads.params[j] - fd).abs() <= tol,
                "trial {trial} param {j}: adjoint {} vs finite difference {fd}",
                grads.params[j]
            );
        }
    }
}

#[test]
fn adjoint_input_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..20 {
        let num_qubits = rng.gen_range(2..=4);
        let circuit_len = rng.gen_range(2..8);
        let circuit = random_circuit(&mut rng, num_qubits, circuit_len);
        let input = random_state(&mut rng, num_qubits);
        let weights: Vec<f64> = (0..num_qubits).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let grads = grad::grad(&circuit, &input, &weights).unwrap();

        // The loss is a quadratic form in the amplitudes, so the value on an
        // unnormalized nudged vector v follows exactly from homogeneity:
        // L(v) = |v|^2 L(v / |v|). That lets the oracle stay on the public,
        // normalization-checked constructor.
        let dim = input.amplitudes().len();
        let h = 1e-6;
        for idx in 0..dim.min(6) {
            for part in 0..2 {
                let nudge = |sign: f64| {
                    let mut amps = input.amplitudes().to_vec();
                    if part == 0 {
                        amps[idx].re += sign * h;
                    } else {
                        amps[idx].im += sign * h;
                    }
                    let norm_sqr: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
                    let norm = norm_sqr.sqrt();
                    let unit: Vec<Complex64> = amps.iter().map(|a| a / norm).collect();
                    let state = StateVector::from_amplitudes(num_qubits, unit).unwrap();
                    norm_sqr * grad::eval_loss(&circuit, &state, &weights).unwrap()
                };
                let fd = (nudge(1.0) - nudge(-1.0)) / (2.0 * h);
                let adj = if part == 0 { grads.input[idx].re } else { grads.input[idx].im };
                assert!(
                    (adj - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
                    "amplitude {idx} part {part}: adjoint {adj} vs finite difference {fd}"
                );
            }
        }
    }
}

#[test]
fn qvc_input_gradient_matches_finite_differences_on_pixels() {
    let model = QvcModel::new(4, 3, 3).unwrap().init_random(17);
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let pixels: Vec<f64> = (0..12).map(|_| rng.gen_range(0.05..0.95)).collect();
    let image = PixelVector::new(pixels.clone(), 4, 3).unwrap();
    let label = 1;

    let grad = model.input_gradient(&image, label).unwrap();
    assert_eq!(grad.len(), 12);

    let h = 1e-5;
    for i in 0..12 {
        let eval = |delta: f64| {
            let mut p = pixels.clone();
            p[i] += delta;
            let img = PixelVector::new(p, 4, 3).unwrap();
            model.loss(&img, label).unwrap()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        assert!(
            (grad[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
            "pixel {i}: analytic {} vs finite difference {fd}",
            grad[i]
        );
    }
}

#[test]
fn classical_input_gradient_matches_finite_differences_on_pixels() {
    let model = ClassicalModel::new(ClassicalSpec::Mlp {
        input: 16,
        hidden: vec![10, 6],
        classes: 4,
    })
    .unwrap()
    .init_he(3);
    let mut rng = ChaCha8Rng::seed_from_u64(29);
    let pixels: Vec<f64> = (0..16).map(|_| rng.gen_range(0.05..0.95)).collect();
    let image = PixelVector::new(pixels.clone(), 4, 4).unwrap();
    let label = 2;

    let grad = model.input_gradient(&image, label).unwrap();
    let h = 1e-6;
    for i in 0..16 {
        let eval = |delta: f64| {
            let mut p = pixels.clone();
            p[i] += delta;
            let img = PixelVector::new(p, 4, 4).unwrap();
            model.loss(&img, label).unwrap()
        };
        let fd = (eval(h) - eval(-h)) / (2.0 * h);
        assert!(
            (grad[i] - fd).abs() <= 1e-5 * (1.0 + fd.abs()),
            "pixel {i}: analytic {} vs finite difference {fd}",
            grad[i]
        );
    }
}
