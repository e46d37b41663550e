//! Exact state-vector representation and gate kernels for n-qubit registers.
//!
//! Convention: qubit `k` is the k-th least-significant bit of the basis-state
//! index, so `|q_{n-1} … q_1 q_0⟩` maps to index `q_0 + 2·q_1 + … + 2^{n-1}·q_{n-1}`.
//! All angles are radians stored as `f64`.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// A quantum gate from the supported set.
///
/// `Rot(phi, theta, omega)` is the three-parameter single-qubit rotation
/// `RZ(omega)·RY(theta)·RZ(phi)` (`RZ(phi)` acts first).
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Rz { wire: usize, angle: f64 },
    Ry { wire: usize, angle: f64 },
    Rot { wire: usize, phi: f64, theta: f64, omega: f64 },
    Cz { a: usize, b: usize },
    X { wire: usize },
}

impl Gate {
    /// Check wire indices against a register size.
    pub fn validate(&self, num_qubits: usize) -> Result<()> {
        let check = |w: usize| {
            if w < num_qubits {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "gate wire {w} out of range for {num_qubits}-qubit register"
                )))
            }
        };
        match *self {
            Gate::Rz { wire, .. } | Gate::Ry { wire, .. } | Gate::Rot { wire, .. } | Gate::X { wire } => {
                check(wire)
            }
            Gate::Cz { a, b } => {
                check(a)?;
                check(b)?;
                if a == b {
                    return Err(Error::Config(format!("CZ wires must be distinct, got ({a}, {b})")));
                }
                Ok(())
            }
        }
    }

    /// The 2×2 matrix `[m00, m01, m10, m11]` of a single-qubit gate, or
    /// `None` for CZ. Shared with the density-matrix oracle so both
    /// simulations agree on gate semantics by construction.
    pub(crate) fn single_qubit_matrix(&self) -> Option<[Complex64; 4]> {
        let zero = Complex64::new(0.0, 0.0);
        match *self {
            Gate::Rz { angle, .. } => {
                let half = angle / 2.0;
                Some([
                    Complex64::from_polar(1.0, -half),
                    zero,
                    zero,
                    Complex64::from_polar(1.0, half),
                ])
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some([
                    Complex64::new(c, 0.0),
                    Complex64::new(-s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(c, 0.0),
                ])
            }
            Gate::Rot { phi, theta, omega, .. } => {
                let (s, c) = (theta / 2.0).sin_cos();
                Some([
                    Complex64::from_polar(c, -(phi + omega) / 2.0),
                    Complex64::from_polar(-s, (phi - omega) / 2.0),
                    Complex64::from_polar(s, -(phi - omega) / 2.0),
                    Complex64::from_polar(c, (phi + omega) / 2.0),
                ])
            }
            Gate::X { .. } => Some([zero, Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0), zero]),
            Gate::Cz { .. } => None,
        }
    }

    pub(crate) fn wire(&self) -> Option<usize> {
        match *self {
            Gate::Rz { wire, .. } | Gate::Ry { wire, .. } | Gate::Rot { wire, .. } | Gate::X { wire } => {
                Some(wire)
            }
            Gate::Cz { .. } => None,
        }
    }

    /// The exact inverse gate: negated angles, `Rot` swaps its outer angles.
    pub fn inverse(&self) -> Gate {
        match *self {
            Gate::Rz { wire, angle } => Gate::Rz { wire, angle: -angle },
            Gate::Ry { wire, angle } => Gate::Ry { wire, angle: -angle },
            Gate::Rot { wire, phi, theta, omega } => Gate::Rot {
                wire,
                phi: -omega,
                theta: -theta,
                omega: -phi,
            },
            Gate::Cz { a, b } => Gate::Cz { a, b },
            Gate::X { wire } => Gate::X { wire },
        }
    }
}

/// Exact inverse of a circuit: gates reversed, each inverted.
pub fn inverse_circuit(circuit: &[Gate]) -> Vec<Gate> {
    circuit.iter().rev().map(Gate::inverse).collect()
}

/// Complex amplitudes over the 2^n computational basis states.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The all-zeros state `|0…0⟩`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 {
            return Err(Error::Config("register needs at least one qubit".into()));
        }
        if num_qubits > 30 {
            return Err(Error::Capacity(format!(
                "{num_qubits} qubits exceed the state-vector capacity of this simulator"
            )));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    /// Build from explicit amplitudes; the vector must have length 2^n and unit norm.
    pub fn from_amplitudes(num_qubits: usize, amps: Vec<Complex64>) -> Result<Self> {
        if num_qubits == 0 || amps.len() != 1 << num_qubits {
            return Err(Error::Config(format!(
                "expected 2^{num_qubits} amplitudes, got {}",
                amps.len()
            )));
        }
        let norm: f64 = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if (norm - 1.0).abs() > 1e-8 {
            return Err(Error::Config(format!("amplitudes have norm {norm}, expected 1")));
        }
        Ok(StateVector { num_qubits, amps })
    }

    pub(crate) fn from_amplitudes_unchecked(num_qubits: usize, amps: Vec<Complex64>) -> Self {
        debug_assert_eq!(amps.len(), 1 << num_qubits);
        StateVector { num_qubits, amps }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    /// l2 norm of the amplitude vector.
    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub(crate) fn renormalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            let inv = 1.0 / n;
            for a in &mut self.amps {
                *a *= inv;
            }
        }
    }

    /// Apply a 2x2 matrix `[m00, m01, m10, m11]` to one qubit, in place.
    pub(crate) fn apply_single(&mut self, wire: usize, m: [Complex64; 4]) {
        let stride = 1 << wire;
        let block = stride << 1;
        for chunk in self.amps.chunks_mut(block) {
            let (lo, hi) = chunk.split_at_mut(stride);
            for i in 0..stride {
                let a = lo[i];
                let b = hi[i];
                lo[i] = m[0] * a + m[1] * b;
                hi[i] = m[2] * a + m[3] * b;
            }
        }
    }

    /// Apply one gate in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.num_qubits)?;
        match *gate {
            Gate::Rz { wire, angle } => {
                let half = angle / 2.0;
                let lo = Complex64::from_polar(1.0, -half);
                let hi = Complex64::from_polar(1.0, half);
                let stride = 1 << wire;
                let block = stride << 1;
                for chunk in self.amps.chunks_mut(block) {
                    for (i, a) in chunk.iter_mut().enumerate() {
                        *a *= if i < stride { lo } else { hi };
                    }
                }
            }
            Gate::Ry { wire, angle } => {
                let (s, c) = (angle / 2.0).sin_cos();
                let m = [
                    Complex64::new(c, 0.0),
                    Complex64::new(-s, 0.0),
                    Complex64::new(s, 0.0),
                    Complex64::new(c, 0.0),
                ];
                self.apply_single(wire, m);
            }
            Gate::Rot { wire, phi, theta, omega } => {
                // Fused RZ(omega)·RY(theta)·RZ(phi).
                let (s, c) = (theta / 2.0).sin_cos();
                let m = [
                    Complex64::from_polar(c, -(phi + omega) / 2.0),
                    Complex64::from_polar(-s, (phi - omega) / 2.0),
                    Complex64::from_polar(s, -(phi - omega) / 2.0),
                    Complex64::from_polar(c, (phi + omega) / 2.0),
                ];
                self.apply_single(wire, m);
            }
            Gate::Cz { a, b } => {
                let mask = (1usize << a) | (1usize << b);
                for (i, amp) in self.amps.iter_mut().enumerate() {
                    if i & mask == mask {
                        *amp = -*amp;
                    }
                }
            }
            Gate::X { wire } => {
                let stride = 1 << wire;
                let block = stride << 1;
                for chunk in self.amps.chunks_mut(block) {
                    let (lo, hi) = chunk.split_at_mut(stride);
                    for i in 0..stride {
                        std::mem::swap(&mut lo[i], &mut hi[i]);
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply a sequence of gates in order.
    pub fn apply_circuit(&mut self, circuit: &[Gate]) -> Result<()> {
        for gate in circuit {
            self.apply(gate)?;
        }
        Ok(())
    }

    /// ⟨σᶻ⟩ on one qubit: Σ_i |a_i|²·(+1 if bit is 0, −1 if bit is 1).
    ///
    /// Deterministic Born-rule sum; no sampling.
    pub fn expectation_z(&self, qubit: usize) -> Result<f64> {
        if qubit >= self.num_qubits {
            return Err(Error::Config(format!(
                "qubit {qubit} out of range for {}-qubit register",
                self.num_qubits
            )));
        }
        let mask = 1usize << qubit;
        let mut total = 0.0;
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if i & mask == 0 {
                total += p;
            } else {
                total -= p;
            }
        }
        Ok(total)
    }
}
