//! Parameterized circuits: the ZZ data-encoding feature map and the
//! RealAmplitudes-style trainable ansatz, both with linear entanglement and a
//! single repetition.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::statevector::{Gate, Statevector};

/// How a gate angle is obtained when the circuit is bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Const(f64),
    /// `scale * x[slot]`.
    Data { slot: usize, scale: f64 },
    /// `phi[slot]`.
    Param(usize),
    /// `2 (π - x[i]) (π - x[j])`, the ZZ pair phase.
    ZzPair(usize, usize),
}

impl Angle {
    fn resolve(&self, features: &[f64], params: &[f64]) -> f64 {
        match *self {
            Angle::Const(a) => a,
            Angle::Data { slot, scale } => scale * features[slot],
            Angle::Param(slot) => params[slot],
            Angle::ZzPair(i, j) => 2.0 * (PI - features[i]) * (PI - features[j]),
        }
    }

    fn max_data_slot(&self) -> Option<usize> {
        match *self {
            Angle::Data { slot, .. } => Some(slot),
            Angle::ZzPair(i, j) => Some(i.max(j)),
            _ => None,
        }
    }

    fn param_slot(&self) -> Option<usize> {
        match *self {
            Angle::Param(slot) => Some(slot),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GateTemplate {
    H { target: usize },
    Ry { target: usize, angle: Angle },
    Rz { target: usize, angle: Angle },
    P { target: usize, angle: Angle },
    Cx { control: usize, target: usize },
}

impl GateTemplate {
    fn angle(&self) -> Option<&Angle> {
        match self {
            GateTemplate::Ry { angle, .. }
            | GateTemplate::Rz { angle, .. }
            | GateTemplate::P { angle, .. } => Some(angle),
            _ => None,
        }
    }

    fn bind(&self, features: &[f64], params: &[f64]) -> Gate {
        match *self {
            GateTemplate::H { target } => Gate::H { target },
            GateTemplate::Ry { target, angle } => Gate::Ry {
                target,
                angle: angle.resolve(features, params),
            },
            GateTemplate::Rz { target, angle } => Gate::Rz {
                target,
                angle: angle.resolve(features, params),
            },
            GateTemplate::P { target, angle } => Gate::P {
                target,
                angle: angle.resolve(features, params),
            },
            GateTemplate::Cx { control, target } => Gate::Cx { control, target },
        }
    }
}

/// Ordered gate templates over a fixed register with declared slot counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamCircuit {
    n_qubits: usize,
    n_features: usize,
    n_params: usize,
    gates: Vec<GateTemplate>,
}

impl ParamCircuit {
    /// Build a circuit, checking that every slot reference is within the
    /// declared feature and parameter counts.
    pub fn new(
        n_qubits: usize,
        n_features: usize,
        n_params: usize,
        gates: Vec<GateTemplate>,
    ) -> Result<Self> {
        for g in &gates {
            if let Some(angle) = g.angle() {
                if let Some(slot) = angle.max_data_slot() {
                    if slot >= n_features {
                        return Err(Error::Config(format!(
                            "data slot {slot} exceeds feature dimension {n_features}"
                        )));
                    }
                }
                if let Some(slot) = angle.param_slot() {
                    if slot >= n_params {
                        return Err(Error::Config(format!(
                            "parameter slot {slot} exceeds parameter count {n_params}"
                        )));
                    }
                }
            }
        }
        Ok(ParamCircuit {
            n_qubits,
            n_features,
            n_params,
            gates,
        })
    }

    /// Feature-map template: `H` on every qubit, `P(2 x_i)` on qubit `i`, then
    /// for each neighbouring pair `CX(i, i+1) · P(2(π - x_i)(π - x_{i+1})) · CX(i, i+1)`.
    pub fn zz_feature_map(n_qubits: usize) -> Self {
        let mut gates: Vec<GateTemplate> = (0..n_qubits)
            .map(|q| GateTemplate::H { target: q })
            .collect();
        gates.extend((0..n_qubits).map(|q| GateTemplate::P {
            target: q,
            angle: Angle::Data {
                slot: q,
                scale: 2.0,
            },
        }));
        for i in 0..n_qubits.saturating_sub(1) {
            gates.push(GateTemplate::Cx {
                control: i,
                target: i + 1,
            });
            gates.push(GateTemplate::P {
                target: i + 1,
                angle: Angle::ZzPair(i, i + 1),
            });
            gates.push(GateTemplate::Cx {
                control: i,
                target: i + 1,
            });
        }
        ParamCircuit {
            n_qubits,
            n_features: n_qubits,
            n_params: 0,
            gates,
        }
    }

    /// Ansatz template with `2 * n_qubits` parameters: an `RY` layer, a linear
    /// CX chain, and a second `RY` layer.
    pub fn real_amplitudes(n_qubits: usize) -> Self {
        let mut gates: Vec<GateTemplate> = (0..n_qubits)
            .map(|q| GateTemplate::Ry {
                target: q,
                angle: Angle::Param(q),
            })
            .collect();
        gates.extend((0..n_qubits.saturating_sub(1)).map(|i| GateTemplate::Cx {
            control: i,
            target: i + 1,
        }));
        gates.extend((0..n_qubits).map(|q| GateTemplate::Ry {
            target: q,
            angle: Angle::Param(n_qubits + q),
        }));
        ParamCircuit {
            n_qubits,
            n_features: 0,
            n_params: 2 * n_qubits,
            gates,
        }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn templates(&self) -> &[GateTemplate] {
        &self.gates
    }

    /// Substitute concrete feature and parameter values.
    pub fn bind(&self, features: &[f64], params: &[f64]) -> Result<Circuit> {
        Error::check_len("feature vector", self.n_features, features.len())?;
        Error::check_len("parameter vector", self.n_params, params.len())?;
        if let Some(bad) = features.iter().chain(params).find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("circuit binding value {bad}")));
        }
        Ok(Circuit {
            n_qubits: self.n_qubits,
            gates: self.gates.iter().map(|g| g.bind(features, params)).collect(),
        })
    }
}

/// A fully bound gate list.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    n_qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n_qubits: usize, gates: Vec<Gate>) -> Result<Self> {
        for g in &gates {
            g.validate(n_qubits)?;
        }
        Ok(Circuit { n_qubits, gates })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    /// Append the gates of `other`, which must act on the same register.
    pub fn then(mut self, other: &Circuit) -> Result<Self> {
        Error::check_len("circuit register", self.n_qubits, other.n_qubits)?;
        self.gates.extend_from_slice(&other.gates);
        Ok(self)
    }

    pub fn apply_to(&self, state: &mut Statevector) -> Result<()> {
        Error::check_len("circuit register", self.n_qubits, state.n_qubits())?;
        state.apply_all(&self.gates)
    }

    /// Run the circuit on `|0…0⟩`.
    pub fn run(&self) -> Result<Statevector> {
        let mut state = Statevector::zero_state(self.n_qubits)?;
        self.apply_to(&mut state)?;
        Ok(state)
    }
}

/// Bound feature map for `x` on `n_qubits` qubits (`x.len()` must equal `n_qubits`).
pub fn zz_feature_map(n_qubits: usize, x: &[f64]) -> Result<Circuit> {
    ParamCircuit::zz_feature_map(n_qubits).bind(x, &[])
}

/// Bound ansatz for `phi` on `n_qubits` qubits (`phi.len()` must equal `2 * n_qubits`).
pub fn real_amplitudes(n_qubits: usize, phi: &[f64]) -> Result<Circuit> {
    ParamCircuit::real_amplitudes(n_qubits).bind(&[], phi)
}

/// `|ψ(x)⟩`: the feature map applied to `|0…0⟩`.
pub fn encode(x: &[f64]) -> Result<Statevector> {
    zz_feature_map(x.len(), x)?.run()
}
