//! Adam and plain SGD update rules over flat parameter vectors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub eta: f64,
}

impl AdamState {
    pub fn new(n_params: usize, eta: f64) -> Self {
        AdamState {
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
            eta,
        }
    }

    /// One update of `params` in place.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        Error::check_len("adam parameters", self.m.len(), params.len())?;
        Error::check_len("adam gradients", self.m.len(), grads.len())?;
        check_finite(grads)?;

        self.t += 1;
        let t = self.t as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for i in 0..params.len() {
            let g = grads[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let m_hat = self.m[i] / bc1;
            let v_hat = self.v[i] / bc2;
            params[i] -= self.eta * m_hat / (v_hat.sqrt() + self.eps);
        }
        Ok(())
    }

    /// `m_t / (1 - β1^t)`; all zeros before the first step.
    pub fn bias_corrected_first_moment(&self) -> Vec<f64> {
        if self.t == 0 {
            return vec![0.0; self.m.len()];
        }
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        self.m.iter().map(|m| m / bc1).collect()
    }
}

/// `params ← params − eta · grads`.
pub fn sgd_step(params: &mut [f64], grads: &[f64], eta: f64) -> Result<()> {
    Error::check_len("sgd gradients", params.len(), grads.len())?;
    check_finite(grads)?;
    for (p, g) in params.iter_mut().zip(grads) {
        *p -= eta * g;
    }
    Ok(())
}

fn check_finite(grads: &[f64]) -> Result<()> {
    match grads.iter().position(|g| !g.is_finite()) {
        Some(i) => Err(Error::NonFinite(format!("gradient entry {i}"))),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerKind {
    Adam,
    Sgd,
}

impl std::fmt::Display for OptimizerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sgd => "sgd",
        })
    }
}

/// Optimizer owned by a training loop.
#[derive(Debug, Clone, PartialEq)]
pub enum Optimizer {
    Adam(AdamState),
    Sgd { eta: f64 },
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, n_params: usize, eta: f64) -> Self {
        match kind {
            OptimizerKind::Adam => Optimizer::Adam(AdamState::new(n_params, eta)),
            OptimizerKind::Sgd => Optimizer::Sgd { eta },
        }
    }

    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) -> Result<()> {
        match self {
            Optimizer::Adam(state) => state.step(params, grads),
            Optimizer::Sgd { eta } => sgd_step(params, grads, *eta),
        }
    }
}
