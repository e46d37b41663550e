//! Exact gradients of readout-weighted losses via the adjoint (reverse) method.
//!
//! For a loss `L = Σ_k c_k·⟨σᶻ_k⟩` over the first `m` qubits of the final
//! state, one forward pass plus one reverse sweep of gate inverses yields
//! `dL/dθ` for every rotation angle and `dL/da_i` for every input amplitude.
//! A parameter-shift evaluator is kept alongside as an independent oracle.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::sim::{Gate, StateVector};

/// Parameter and input-amplitude gradients from one adjoint sweep.
#[derive(Debug, Clone)]
pub struct Gradients {
    /// dL/dθ for each parameter slot, in circuit order.
    pub params: Vec<f64>,
    /// dL/da_i with the real part holding d/d(Re a_i) and the imaginary part
    /// holding d/d(Im a_i), both treated as independent coordinates.
    pub input: Vec<Complex64>,
}

/// Primitive gate with an optional parameter slot. `Rot` expands to three.
#[derive(Debug, Clone, Copy)]
enum Prim {
    Rz { wire: usize, angle: f64, slot: Option<usize> },
    Ry { wire: usize, angle: f64, slot: Option<usize> },
    Cz { a: usize, b: usize },
    X { wire: usize },
}

impl Prim {
    fn slot(&self) -> Option<usize> {
        match *self {
            Prim::Rz { slot, .. } | Prim::Ry { slot, .. } => slot,
            _ => None,
        }
    }

    fn apply(&self, state: &mut StateVector) -> Result<()> {
        match *self {
            Prim::Rz { wire, angle, .. } => state.apply(&Gate::Rz { wire, angle }),
            Prim::Ry { wire, angle, .. } => state.apply(&Gate::Ry { wire, angle }),
            Prim::Cz { a, b } => state.apply(&Gate::Cz { a, b }),
            Prim::X { wire } => state.apply(&Gate::X { wire }),
        }
    }

    fn unapply(&self, state: &mut StateVector) -> Result<()> {
        match *self {
            Prim::Rz { wire, angle, .. } => state.apply(&Gate::Rz { wire, angle: -angle }),
            Prim::Ry { wire, angle, .. } => state.apply(&Gate::Ry { wire, angle: -angle }),
            Prim::Cz { a, b } => state.apply(&Gate::Cz { a, b }),
            Prim::X { wire } => state.apply(&Gate::X { wire }),
        }
    }
}

/// Expand `Rot` gates into RZ·RY·RZ primitives and assign parameter slots.
///
/// Slots are assigned in circuit order; a `Rot(phi, theta, omega)` occupies
/// three consecutive slots in that order.
fn expand(circuit: &[Gate]) -> (Vec<Prim>, usize) {
    let mut prims = Vec::with_capacity(circuit.len());
    let mut slot = 0;
    for gate in circuit {
        match *gate {
            Gate::Rz { wire, angle } => {
                prims.push(Prim::Rz { wire, angle, slot: Some(slot) });
                slot += 1;
            }
            Gate::Ry { wire, angle } => {
                prims.push(Prim::Ry { wire, angle, slot: Some(slot) });
                slot += 1;
            }
            Gate::Rot { wire, phi, theta, omega } => {
                prims.push(Prim::Rz { wire, angle: phi, slot: Some(slot) });
                prims.push(Prim::Ry { wire, angle: theta, slot: Some(slot + 1) });
                prims.push(Prim::Rz { wire, angle: omega, slot: Some(slot + 2) });
                slot += 3;
            }
            Gate::Cz { a, b } => prims.push(Prim::Cz { a, b }),
            Gate::X { wire } => prims.push(Prim::X { wire }),
        }
    }
    (prims, slot)
}

/// Number of trainable parameter slots in a circuit.
pub fn param_count(circuit: &[Gate]) -> usize {
    expand(circuit).1
}

/// Multiply each amplitude by `Σ_k c_k·z_k(i)` where `z_k(i) = ±1` is the
/// Z eigenvalue of qubit k at basis index i. This is `H|ψ⟩` for the diagonal
/// observable `H = Σ_k c_k σᶻ_k`.
fn apply_weighted_z(state: &mut StateVector, cotangents: &[f64]) {
    let amps = state.amplitudes_mut();
    for (i, a) in amps.iter_mut().enumerate() {
        let mut w = 0.0;
        for (k, &c) in cotangents.iter().enumerate() {
            if i & (1 << k) == 0 {
                w += c;
            } else {
                w -= c;
            }
        }
        *a *= w;
    }
}

/// Im⟨λ|G|ψ⟩ for the rotation generator `G ∈ {Z, Y}` on one wire.
fn generator_overlap_im(lambda: &StateVector, prim: &Prim, psi: &StateVector) -> f64 {
    let l = lambda.amplitudes();
    let p = psi.amplitudes();
    match *prim {
        Prim::Rz { wire, .. } => {
            // G = Z: diagonal ±1.
            let mask = 1usize << wire;
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..p.len() {
                let z = l[i].conj() * p[i];
                if i & mask == 0 {
                    acc += z;
                } else {
                    acc -= z;
                }
            }
            acc.im
        }
        Prim::Ry { wire, .. } => {
            // G = Y: (Yψ)_{i0} = −i·ψ_{i1}, (Yψ)_{i1} = +i·ψ_{i0}.
            let stride = 1usize << wire;
            let block = stride << 1;
            let mut acc = Complex64::new(0.0, 0.0);
            let mi = Complex64::new(0.0, -1.0);
            let pi = Complex64::new(0.0, 1.0);
            let mut base = 0;
            while base < p.len() {
                for i in base..base + stride {
                    acc += l[i].conj() * (mi * p[i + stride]);
                    acc += l[i + stride].conj() * (pi * p[i]);
                }
                base += block;
            }
            acc.im
        }
        _ => 0.0,
    }
}

/// One adjoint sweep: gradients with respect to every rotation angle and
/// every input amplitude of `L = Σ_k c_k·⟨σᶻ_k⟩` on the first
/// `cotangents.len()` qubits.
pub fn grad(circuit: &[Gate], input: &StateVector, cotangents: &[f64]) -> Result<Gradients> {
    if cotangents.len() > input.num_qubits() {
        return Err(Error::Config(format!(
            "{} readout cotangents for a {}-qubit register",
            cotangents.len(),
            input.num_qubits()
        )));
    }
    for gate in circuit {
        gate.validate(input.num_qubits())?;
    }
    let (prims, n_params) = expand(circuit);

    let mut psi = input.clone();
    for prim in &prims {
        prim.apply(&mut psi)?;
    }
    let mut lambda = psi.clone();
    apply_weighted_z(&mut lambda, cotangents);

    let mut params = vec![0.0; n_params];
    for prim in prims.iter().rev() {
        if let Some(slot) = prim.slot() {
            params[slot] = generator_overlap_im(&lambda, prim, &psi);
        }
        prim.unapply(&mut psi)?;
        prim.unapply(&mut lambda)?;
    }

    // λ is now U†·H·U|φ⟩; for L = ⟨φ|U†HU|φ⟩ the derivative with respect to
    // the real (imaginary) part of φ_i is twice its real (imaginary) part.
    let input_grad = lambda.amplitudes().iter().map(|a| 2.0 * a).collect();
    Ok(Gradients { params, input: input_grad })
}

/// dL/dθ for every parameter slot.
pub fn grad_params(circuit: &[Gate], input: &StateVector, cotangents: &[f64]) -> Result<Vec<f64>> {
    Ok(grad(circuit, input, cotangents)?.params)
}

/// dL/da_i for every input amplitude.
pub fn grad_input(circuit: &[Gate], input: &StateVector, cotangents: &[f64]) -> Result<Vec<Complex64>> {
    Ok(grad(circuit, input, cotangents)?.input)
}

/// Forward evaluation of `L = Σ_k c_k·⟨σᶻ_k⟩`.
pub fn eval_loss(circuit: &[Gate], input: &StateVector, cotangents: &[f64]) -> Result<f64> {
    let mut state = input.clone();
    state.apply_circuit(circuit)?;
    let mut loss = 0.0;
    for (k, &c) in cotangents.iter().enumerate() {
        loss += c * state.expectation_z(k)?;
    }
    Ok(loss)
}

/// Copy of the circuit with parameter slot `slot` shifted by `delta` radians.
pub fn shift_param(circuit: &[Gate], slot: usize, delta: f64) -> Result<Vec<Gate>> {
    let mut out = circuit.to_vec();
    let mut next = 0;
    for gate in &mut out {
        match gate {
            Gate::Rz { angle, .. } | Gate::Ry { angle, .. } => {
                if next == slot {
                    *angle += delta;
                    return Ok(out);
                }
                next += 1;
            }
            Gate::Rot { phi, theta, omega, .. } => {
                if slot < next + 3 {
                    match slot - next {
                        0 => *phi += delta,
                        1 => *theta += delta,
                        _ => *omega += delta,
                    }
                    return Ok(out);
                }
                next += 3;
            }
            Gate::Cz { .. } | Gate::X { .. } => {}
        }
    }
    Err(Error::Config(format!(
        "parameter slot {slot} out of range (circuit has {next} parameters)"
    )))
}

/// Parameter-shift derivative `[L(θ+π/2) − L(θ−π/2)] / 2`, exact for the
/// RZ/RY rotation generators. Independent oracle for [`grad_params`].
pub fn param_shift_check(
    circuit: &[Gate],
    input: &StateVector,
    cotangents: &[f64],
    slot: usize,
) -> Result<f64> {
    let half_pi = std::f64::consts::FRAC_PI_2;
    let plus = eval_loss(&shift_param(circuit, slot, half_pi)?, input, cotangents)?;
    let minus = eval_loss(&shift_param(circuit, slot, -half_pi)?, input, cotangents)?;
    Ok((plus - minus) / 2.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Central finite differences over parameter slots; the independent
    /// oracle for the adjoint path (forward evaluations only).
    fn fd_grad_params(circuit: &[Gate], input: &StateVector, cotangents: &[f64], h: f64) -> Vec<f64> {
        (0..param_count(circuit))
            .map(|slot| {
                let plus = eval_loss(&shift_param(circuit, slot, h).unwrap(), input, cotangents).unwrap();
                let minus =
                    eval_loss(&shift_param(circuit, slot, -h).unwrap(), input, cotangents).unwrap();
                (plus - minus) / (2.0 * h)
            })
            .collect()
    }

    /// Central finite differences over real and imaginary amplitude parts.
    /// Off-normalized probe states are fine: L is a quadratic form.
    fn fd_grad_input(circuit: &[Gate], input: &StateVector, cotangents: &[f64], h: f64) -> Vec<Complex64> {
        let n = input.num_qubits();
        let eval = |amps: &[Complex64]| {
            let s = StateVector::from_amplitudes_unchecked(n, amps.to_vec());
            eval_loss(circuit, &s, cotangents).unwrap()
        };
        let base = input.amplitudes().to_vec();
        (0..base.len())
            .map(|i| {
                let mut re_p = base.clone();
                re_p[i] += Complex64::new(h, 0.0);
                let mut re_m = base.clone();
                re_m[i] -= Complex64::new(h, 0.0);
                let dre = (eval(&re_p) - eval(&re_m)) / (2.0 * h);
                let mut im_p = base.clone();
                im_p[i] += Complex64::new(0.0, h);
                let mut im_m = base.clone();
                im_m[i] -= Complex64::new(0.0, h);
                let dim = (eval(&im_p) - eval(&im_m)) / (2.0 * h);
                Complex64::new(dre, dim)
            })
            .collect()
    }

    fn rel_close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * (1.0_f64).max(a.abs().max(b.abs()))
    }

    fn random_state(n: usize, rng: &mut ChaCha8Rng) -> StateVector {
        let mut amps: Vec<Complex64> = (0..1usize << n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        for a in &mut amps {
            *a /= norm;
        }
        StateVector::from_amplitudes(n, amps).unwrap()
    }

    fn random_layered_circuit(n: usize, layers: usize, rng: &mut ChaCha8Rng) -> Vec<Gate> {
        let mut gates = Vec::new();
        for _ in 0..layers {
            for wire in 0..n {
                gates.push(Gate::Rot {
                    wire,
                    phi: rng.gen_range(-3.0..3.0),
                    theta: rng.gen_range(-3.0..3.0),
                    omega: rng.gen_range(-3.0..3.0),
                });
            }
            for wire in 0..n.saturating_sub(1) {
                gates.push(Gate::Cz { a: wire, b: wire + 1 });
            }
        }
        gates
    }

    #[test]
    fn single_ry_gradient_at_zero_and_half_pi() {
        let input = StateVector::zero(1).unwrap();
        let zero = grad_params(&[Gate::Ry { wire: 0, angle: 0.0 }], &input, &[1.0]).unwrap();
        assert!(zero[0].abs() < 1e-10);
        let half = grad_params(
            &[Gate::Ry { wire: 0, angle: std::f64::consts::FRAC_PI_2 }],
            &input,
            &[1.0],
        )
        .unwrap();
        assert!((half[0] + 1.0).abs() < 1e-10, "d cos(θ)/dθ at π/2 is −1, got {}", half[0]);
    }

    #[test]
    fn zero_cotangent_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let circuit = random_layered_circuit(3, 2, &mut rng);
        let input = random_state(3, &mut rng);
        let g = grad(&circuit, &input, &[0.0, 0.0]).unwrap();
        assert!(g.params.iter().all(|&x| x == 0.0));
        assert!(g.input.iter().all(|a| a.norm() == 0.0));
    }

    #[test]
    fn adjoint_matches_finite_differences_on_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let circuit = random_layered_circuit(4, 3, &mut rng);
            let input = random_state(4, &mut rng);
            let cot: Vec<f64> = (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let adjoint = grad_params(&circuit, &input, &cot).unwrap();
            let fd = fd_grad_params(&circuit, &input, &cot, 1e-5);
            for (a, f) in adjoint.iter().zip(&fd) {
                assert!(rel_close(*a, *f, 1e-6), "adjoint {a} vs fd {f}");
            }
        }
    }

    #[test]
    fn identity_circuit_input_gradient_closed_form() {
        // L = a₀² − a₁² for a real 1-qubit state, so dL/da = (2a₀, −2a₁).
        let amps = vec![Complex64::new(0.6, 0.0), Complex64::new(0.8, 0.0)];
        let input = StateVector::from_amplitudes(1, amps).unwrap();
        let g = grad_input(&[], &input, &[1.0]).unwrap();
        assert!((g[0] - Complex64::new(1.2, 0.0)).norm() < 1e-12);
        assert!((g[1] - Complex64::new(-1.6, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let circuit = random_layered_circuit(3, 2, &mut rng);
            let input = random_state(3, &mut rng);
            let cot: Vec<f64> = (0..2).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let adjoint = grad_input(&circuit, &input, &cot).unwrap();
            let fd = fd_grad_input(&circuit, &input, &cot, 1e-5);
            for (a, f) in adjoint.iter().zip(&fd) {
                assert!(rel_close(a.re, f.re, 1e-6), "re {} vs {}", a.re, f.re);
                assert!(rel_close(a.im, f.im, 1e-6), "im {} vs {}", a.im, f.im);
            }
        }
    }

    #[test]
    fn param_shift_analytic_cases() {
        let input = StateVector::zero(1).unwrap();
        let circuit = [Gate::Ry { wire: 0, angle: std::f64::consts::FRAC_PI_2 }];
        let d = param_shift_check(&circuit, &input, &[1.0], 0).unwrap();
        assert!((d + 1.0).abs() < 1e-12);

        // RZ on a Z eigenstate is invisible to a Z readout.
        let rz = [Gate::Rz { wire: 0, angle: 0.7 }];
        let d = param_shift_check(&rz, &input, &[1.0], 0).unwrap();
        assert!(d.abs() < 1e-12);
    }

    #[test]
    fn adjoint_and_param_shift_agree_on_100_random_circuits() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..100 {
            let n = rng.gen_range(1..=4);
            let layers = rng.gen_range(1..=3);
            let circuit = random_layered_circuit(n, layers, &mut rng);
            let input = random_state(n, &mut rng);
            let m = rng.gen_range(1..=n);
            let cot: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let adjoint = grad_params(&circuit, &input, &cot).unwrap();
            let slot = rng.gen_range(0..adjoint.len());
            let shift = param_shift_check(&circuit, &input, &cot, slot).unwrap();
            assert!(
                (adjoint[slot] - shift).abs() < 1e-9,
                "adjoint {} vs shift {}",
                adjoint[slot],
                shift
            );
        }
    }

    #[test]
    fn final_rz_before_z_readout_has_zero_gradient() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut circuit = random_layered_circuit(3, 2, &mut rng);
        circuit.push(Gate::Rz { wire: 0, angle: 1.3 });
        let last_slot = param_count(&circuit) - 1;
        let input = random_state(3, &mut rng);
        let g = grad_params(&circuit, &input, &[1.0]).unwrap();
        assert!(g[last_slot].abs() < 1e-9);
    }

    #[test]
    fn gradients_are_linear_in_cotangents() {
        let mut rng = ChaCha8Rng::seed_from_u64(47);
        let circuit = random_layered_circuit(3, 2, &mut rng);
        let input = random_state(3, &mut rng);
        let c1 = [0.3, -0.8, 0.1];
        let c2 = [-1.1, 0.4, 0.9];
        let combined: Vec<f64> = c1.iter().zip(&c2).map(|(a, b)| 2.0 * a + 0.5 * b).collect();
        let g1 = grad_params(&circuit, &input, &c1).unwrap();
        let g2 = grad_params(&circuit, &input, &c2).unwrap();
        let gc = grad_params(&circuit, &input, &combined).unwrap();
        for i in 0..gc.len() {
            assert!((gc[i] - (2.0 * g1[i] + 0.5 * g2[i])).abs() < 1e-9);
        }
    }

    #[test]
    fn shift_param_rejects_out_of_range_slot() {
        let circuit = [Gate::Ry { wire: 0, angle: 0.0 }];
        assert_eq!(shift_param(&circuit, 1, 0.1).unwrap_err().category(), "config");
    }
}
