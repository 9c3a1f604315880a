//! Estimator-style quantum layer: encode features, run the ansatz, read out
//! one Pauli-Z expectation per observable qubit.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::circuits::{real_amplitudes, zz_feature_map, Circuit};
use crate::error::{Error, Result};
use crate::statevector::Statevector;

pub const N_QUBITS: usize = 3;
pub const N_PARAMS: usize = 2 * N_QUBITS;

/// Jacobian of the layer outputs with respect to the ansatz parameters,
/// indexed `[output][param]`.
pub type Jacobian = Vec<Vec<f64>>;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantumLayer {
    pub phi: Vec<f64>,
    pub observables: Vec<usize>,
    /// Finite-shot readout; `None` means exact expectations.
    pub shots: Option<u64>,
}

impl QuantumLayer {
    /// Layer with one Z observable per qubit and exact readout.
    pub fn new(phi: Vec<f64>) -> Result<Self> {
        Self::with_observables(phi, (0..N_QUBITS).collect())
    }

    pub fn with_observables(phi: Vec<f64>, observables: Vec<usize>) -> Result<Self> {
        Error::check_len("ansatz parameters", N_PARAMS, phi.len())?;
        if observables.is_empty() {
            return Err(Error::Empty("observable list"));
        }
        if let Some(&q) = observables.iter().find(|&&q| q >= N_QUBITS) {
            return Err(Error::QubitOutOfRange {
                qubit: q,
                n_qubits: N_QUBITS,
            });
        }
        Ok(QuantumLayer {
            phi,
            observables,
            shots: None,
        })
    }

    pub fn with_shots(mut self, shots: Option<u64>) -> Result<Self> {
        if shots == Some(0) {
            return Err(Error::ZeroShots);
        }
        self.shots = shots;
        Ok(self)
    }

    pub fn output_dim(&self) -> usize {
        self.observables.len()
    }

    fn state(&self, x: &[f64], phi: &[f64]) -> Result<Statevector> {
        let circuit: Circuit = zz_feature_map(N_QUBITS, x)?.then(&real_amplitudes(N_QUBITS, phi)?)?;
        circuit.run()
    }

    fn exact_outputs(&self, x: &[f64], phi: &[f64]) -> Result<Vec<f64>> {
        let state = self.state(x, phi)?;
        self.observables.iter().map(|&q| state.expect_z(q)).collect()
    }

    /// Exact expectations regardless of the configured shot count.
    pub fn forward_exact(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.exact_outputs(x, &self.phi)
    }

    /// Forward pass honouring the shot setting. `seed` drives the sampler
    /// and is ignored in exact mode.
    pub fn forward(&self, x: &[f64], seed: u64) -> Result<Vec<f64>> {
        match self.shots {
            None => self.forward_exact(x),
            Some(shots) => self.forward_sampled(x, shots, seed),
        }
    }

    /// Finite-shot expectations; each observable gets its own sampler stream.
    pub fn forward_sampled(&self, x: &[f64], shots: u64, seed: u64) -> Result<Vec<f64>> {
        let state = self.state(x, &self.phi)?;
        self.observables
            .iter()
            .enumerate()
            .map(|(k, &q)| state.sample_expect_z(q, shots, stream_seed(seed, k as u64)))
            .collect()
    }

    /// Parameter-shift Jacobian (exact mode), `2 * N_PARAMS` extra circuit runs.
    pub fn gradient(&self, x: &[f64]) -> Result<Jacobian> {
        self.gradient_with_shift(x, FRAC_PI_2)
    }

    /// Shift-rule Jacobian with an arbitrary shift; `-π/2` negates it.
    pub fn gradient_with_shift(&self, x: &[f64], shift: f64) -> Result<Jacobian> {
        parameter_shift(&self.phi, shift, |phi| self.exact_outputs(x, phi))
    }
}

/// `½ [E(θ + s·e_k) − E(θ − s·e_k)]` for every parameter `k` of an
/// expectation function `E`. With `s = π/2` and rotation-generated
/// parameters this is the exact derivative.
pub fn parameter_shift<F>(params: &[f64], shift: f64, eval: F) -> Result<Jacobian>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let mut jac: Jacobian = Vec::new();
    let mut shifted = params.to_vec();
    for k in 0..params.len() {
        shifted[k] = params[k] + shift;
        let plus = eval(&shifted)?;
        shifted[k] = params[k] - shift;
        let minus = eval(&shifted)?;
        shifted[k] = params[k];
        if jac.is_empty() {
            jac = vec![vec![0.0; params.len()]; plus.len()];
        }
        Error::check_len("shifted outputs", plus.len(), minus.len())?;
        for (j, row) in jac.iter_mut().enumerate() {
            row[k] = 0.5 * (plus[j] - minus[j]);
        }
    }
    Ok(jac)
}

/// Mix a base seed with a stream index (splitmix64 finalizer).
pub(crate) fn stream_seed(base: u64, stream: u64) -> u64 {
    let mut z = base ^ stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
