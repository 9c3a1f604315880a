//! Dense statevector simulation.
//!
//! Conventions used throughout the crate:
//!
//! * qubit 0 is the least-significant bit of the basis index, so the basis
//!   state `|q2 q1 q0⟩` has index `q0 + 2*q1 + 4*q2`;
//! * `RY(θ) = exp(-iθY/2) = [[cos θ/2, -sin θ/2], [sin θ/2, cos θ/2]]`;
//! * `RZ(θ) = exp(-iθZ/2) = diag(e^{-iθ/2}, e^{iθ/2})`;
//! * `P(λ) = diag(1, e^{iλ})`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};

/// Largest register the simulator will allocate.
pub const MAX_QUBITS: usize = 20;

/// A concrete gate acting on one or two qubits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H { target: usize },
    Ry { target: usize, angle: f64 },
    Rz { target: usize, angle: f64 },
    P { target: usize, angle: f64 },
    Cx { control: usize, target: usize },
}

impl Gate {
    pub fn h(target: usize) -> Self {
        Gate::H { target }
    }

    pub fn ry(target: usize, angle: f64) -> Self {
        Gate::Ry { target, angle }
    }

    pub fn rz(target: usize, angle: f64) -> Self {
        Gate::Rz { target, angle }
    }

    pub fn p(target: usize, angle: f64) -> Self {
        Gate::P { target, angle }
    }

    pub fn cx(control: usize, target: usize) -> Self {
        Gate::Cx { control, target }
    }

    pub fn target(&self) -> usize {
        match *self {
            Gate::H { target }
            | Gate::Ry { target, .. }
            | Gate::Rz { target, .. }
            | Gate::P { target, .. }
            | Gate::Cx { target, .. } => target,
        }
    }

    pub fn control(&self) -> Option<usize> {
        match *self {
            Gate::Cx { control, .. } => Some(control),
            _ => None,
        }
    }

    /// The inverse gate. H and CX are self-inverse; rotations negate their angle.
    pub fn inverse(&self) -> Self {
        match *self {
            Gate::Ry { target, angle } => Gate::Ry {
                target,
                angle: -angle,
            },
            Gate::Rz { target, angle } => Gate::Rz {
                target,
                angle: -angle,
            },
            Gate::P { target, angle } => Gate::P {
                target,
                angle: -angle,
            },
            g @ (Gate::H { .. } | Gate::Cx { .. }) => g,
        }
    }

    /// Check that every index is in range for an `n_qubits` register.
    pub fn validate(&self, n_qubits: usize) -> Result<()> {
        let check = |qubit: usize| {
            if qubit < n_qubits {
                Ok(())
            } else {
                Err(Error::QubitOutOfRange { qubit, n_qubits })
            }
        };
        check(self.target())?;
        if let Some(control) = self.control() {
            check(control)?;
            if control == self.target() {
                return Err(Error::SameControlTarget(control));
            }
        }
        Ok(())
    }

    /// 2x2 unitary for single-qubit gates, row-major.
    fn single_qubit_matrix(&self) -> Option<[[Complex64; 2]; 2]> {
        let zero = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        match *self {
            Gate::H { .. } => {
                let s = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
                Some([[s, s], [s, -s]])
            }
            Gate::Ry { angle, .. } => {
                let (s, c) = (angle / 2.0).sin_cos();
                Some([
                    [Complex64::new(c, 0.0), Complex64::new(-s, 0.0)],
                    [Complex64::new(s, 0.0), Complex64::new(c, 0.0)],
                ])
            }
            Gate::Rz { angle, .. } => Some([
                [Complex64::from_polar(1.0, -angle / 2.0), zero],
                [zero, Complex64::from_polar(1.0, angle / 2.0)],
            ]),
            Gate::P { angle, .. } => Some([[one, zero], [zero, Complex64::from_polar(1.0, angle)]]),
            Gate::Cx { .. } => None,
        }
    }
}

/// Dense amplitude vector of an `n_qubits` register.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amplitudes: Vec<Complex64>,
}

impl Statevector {
    /// `|0…0⟩` on `n_qubits` qubits.
    pub fn zero_state(n_qubits: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }

    /// Wrap raw amplitudes. The vector length must be a power of two and the
    /// state must be normalized to within 1e-9.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if !len.is_power_of_two() || len < 2 {
            return Err(Error::Config(format!(
                "amplitude vector length {len} is not a power of two >= 2"
            )));
        }
        let n_qubits = len.trailing_zeros() as usize;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let state = Statevector {
            n_qubits,
            amplitudes,
        };
        let norm = state.norm_sqr();
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::Config(format!("state is not normalized (norm² = {norm})")));
        }
        Ok(state)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amplitudes.iter().map(|a| a.norm_sqr()).collect()
    }

    /// Apply `gate` in place.
    pub fn apply(&mut self, gate: &Gate) -> Result<()> {
        gate.validate(self.n_qubits)?;
        match *gate {
            Gate::Cx { control, target } => {
                let cmask = 1usize << control;
                let tmask = 1usize << target;
                for i in 0..self.amplitudes.len() {
                    // visit each swapped pair once, from its target-bit-0 member
                    if i & cmask != 0 && i & tmask == 0 {
                        self.amplitudes.swap(i, i | tmask);
                    }
                }
            }
            _ => {
                let m = gate
                    .single_qubit_matrix()
                    .expect("non-CX gates have a 2x2 matrix");
                let tmask = 1usize << gate.target();
                for i in 0..self.amplitudes.len() {
                    if i & tmask == 0 {
                        let j = i | tmask;
                        let a0 = self.amplitudes[i];
                        let a1 = self.amplitudes[j];
                        self.amplitudes[i] = m[0][0] * a0 + m[0][1] * a1;
                        self.amplitudes[j] = m[1][0] * a0 + m[1][1] * a1;
                    }
                }
            }
        }
        Ok(())
    }

    /// Apply `gate` and return the transformed state.
    pub fn with_gate(mut self, gate: &Gate) -> Result<Self> {
        self.apply(gate)?;
        Ok(self)
    }

    pub fn apply_all<'a>(&mut self, gates: impl IntoIterator<Item = &'a Gate>) -> Result<()> {
        for gate in gates {
            self.apply(gate)?;
        }
        Ok(())
    }

    fn check_qubit(&self, qubit: usize) -> Result<()> {
        if qubit < self.n_qubits {
            Ok(())
        } else {
            Err(Error::QubitOutOfRange {
                qubit,
                n_qubits: self.n_qubits,
            })
        }
    }

    /// Probability of reading 1 when measuring `qubit` in the Z basis.
    pub fn prob_one(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        Ok(self
            .amplitudes
            .iter()
            .enumerate()
            .filter(|(i, _)| i & mask != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum())
    }

    /// Exact `⟨Z⟩` on `qubit`.
    pub fn expect_z(&self, qubit: usize) -> Result<f64> {
        self.check_qubit(qubit)?;
        let mask = 1usize << qubit;
        let value: f64 = self
            .amplitudes
            .iter()
            .enumerate()
            .map(|(i, a)| {
                let p = a.norm_sqr();
                if i & mask == 0 {
                    p
                } else {
                    -p
                }
            })
            .sum();
        Ok(value.clamp(-1.0, 1.0))
    }

    /// Finite-shot estimate of `⟨Z⟩` on `qubit`: `(n_plus - n_minus) / shots`.
    pub fn sample_expect_z(&self, qubit: usize, shots: u64, rng_seed: u64) -> Result<f64> {
        if shots == 0 {
            return Err(Error::ZeroShots);
        }
        let p_one = self.prob_one(qubit)?.clamp(0.0, 1.0);
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let n_minus = Binomial::new(shots, p_one)
            .map_err(|e| Error::Config(format!("binomial sampler: {e}")))?
            .sample(&mut rng);
        let n_plus = shots - n_minus;
        Ok((n_plus as f64 - n_minus as f64) / shots as f64)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &Statevector) -> Result<Complex64> {
        Error::check_len("statevector", self.amplitudes.len(), other.amplitudes.len())?;
        Ok(self
            .amplitudes
            .iter()
            .zip(&other.amplitudes)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|⟨self|other⟩|²`, clamped to `[0, 1]`.
    pub fn fidelity(&self, other: &Statevector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr().clamp(0.0, 1.0))
    }

    /// Tensor product with `self` on the low qubits and `high` above it.
    pub fn tensor(&self, high: &Statevector) -> Result<Statevector> {
        let n_qubits = self.n_qubits + high.n_qubits;
        if n_qubits > MAX_QUBITS {
            return Err(Error::QubitCount(n_qubits));
        }
        let mut amplitudes = Vec::with_capacity(1 << n_qubits);
        for b in &high.amplitudes {
            for a in &self.amplitudes {
                amplitudes.push(a * b);
            }
        }
        Ok(Statevector {
            n_qubits,
            amplitudes,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, PI};

    fn close(a: Complex64, re: f64, im: f64) -> bool {
        (a.re - re).abs() < 1e-12 && (a.im - im).abs() < 1e-12
    }

    #[test]
    fn zero_state_shapes() {
        let s = Statevector::zero_state(1).unwrap();
        assert_eq!(s.amplitudes(), &[Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let s = Statevector::zero_state(3).unwrap();
        assert_eq!(s.amplitudes().len(), 8);
        assert_eq!(s.amplitudes()[0], Complex64::new(1.0, 0.0));
        assert!(s.amplitudes()[1..].iter().all(|a| a.norm_sqr() == 0.0));
    }

    #[test]
    fn zero_state_rejects_out_of_cap() {
        assert!(matches!(Statevector::zero_state(0), Err(Error::QubitCount(0))));
        assert!(Statevector::zero_state(MAX_QUBITS + 1).is_err());
    }

    #[test]
    fn hadamard_on_zero() {
        let s = Statevector::zero_state(1).unwrap().with_gate(&Gate::h(0)).unwrap();
        assert!(close(s.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(s.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
        assert!(s.expect_z(0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn ry_pi_flips() {
        let s = Statevector::zero_state(1).unwrap().with_gate(&Gate::ry(0, PI)).unwrap();
        assert!(close(s.amplitudes()[0], 0.0, 0.0));
        assert!(close(s.amplitudes()[1], 1.0, 0.0));
    }

    #[test]
    fn cx_truth_table() {
        // |q0 q1⟩ = |10⟩ (basis index 1) -> |11⟩ (index 3)
        let s = Statevector::zero_state(2)
            .unwrap()
            .with_gate(&Gate::ry(0, PI))
            .unwrap()
            .with_gate(&Gate::cx(0, 1))
            .unwrap();
        assert!(close(s.amplitudes()[3], 1.0, 0.0));
        // control clear: untouched
        let s = Statevector::zero_state(2)
            .unwrap()
            .with_gate(&Gate::ry(1, PI))
            .unwrap()
            .with_gate(&Gate::cx(0, 1))
            .unwrap();
        assert!(close(s.amplitudes()[2], 1.0, 0.0));
    }

    #[test]
    fn index_errors() {
        let mut s = Statevector::zero_state(2).unwrap();
        assert!(matches!(
            s.apply(&Gate::h(2)),
            Err(Error::QubitOutOfRange { qubit: 2, n_qubits: 2 })
        ));
        assert!(matches!(s.apply(&Gate::cx(1, 1)), Err(Error::SameControlTarget(1))));
        assert!(s.expect_z(5).is_err());
        assert!(s.sample_expect_z(5, 10, 0).is_err());
    }

    #[test]
    fn expect_z_ry_is_cos() {
        for theta in [0.3, 1.1, 2.5] {
            let s = Statevector::zero_state(1).unwrap().with_gate(&Gate::ry(0, theta)).unwrap();
            assert!((s.expect_z(0).unwrap() - f64::cos(theta)).abs() < 1e-12);
        }
    }

    #[test]
    fn sampling_edge_cases() {
        let zero = Statevector::zero_state(1).unwrap();
        assert_eq!(zero.sample_expect_z(0, 17, 3).unwrap(), 1.0);
        assert!(matches!(zero.sample_expect_z(0, 0, 3), Err(Error::ZeroShots)));

        let flipped = zero.clone().with_gate(&Gate::ry(0, PI)).unwrap();
        assert_eq!(flipped.sample_expect_z(0, 1, 9).unwrap(), -1.0);

        let plus = zero.with_gate(&Gate::h(0)).unwrap();
        let est = plus.sample_expect_z(0, 4096, 42).unwrap();
        assert!(est.abs() < 0.05, "{est}");
        assert_eq!(est, plus.sample_expect_z(0, 4096, 42).unwrap());
    }

    #[test]
    fn tensor_and_fidelity() {
        let a = Statevector::zero_state(1).unwrap().with_gate(&Gate::h(0)).unwrap();
        let b = Statevector::zero_state(1).unwrap();
        let ab = a.tensor(&b).unwrap();
        assert_eq!(ab.n_qubits(), 2);
        assert!(close(ab.amplitudes()[0], FRAC_1_SQRT_2, 0.0));
        assert!(close(ab.amplitudes()[1], FRAC_1_SQRT_2, 0.0));
        assert!((a.fidelity(&b).unwrap() - 0.5).abs() < 1e-12);
        assert!((a.fidelity(&a).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn from_amplitudes_checks_norm() {
        let bad = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        assert!(Statevector::from_amplitudes(bad).is_err());
        let odd = vec![Complex64::new(1.0, 0.0); 3];
        assert!(Statevector::from_amplitudes(odd).is_err());
    }
}
