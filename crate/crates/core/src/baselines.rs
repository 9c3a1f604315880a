//! Comparison methods: k-nearest-neighbour regression and nearest-fidelity
//! quantum fingerprint matching. The classical NN baseline is a plain
//! [`DenseNet`](crate::classical::DenseNet) trained by `train_eval`.

use std::f64::consts::FRAC_PI_4;

use crate::circuits::encode;
use crate::classical::Coord;
use crate::error::{Error, Result};
use crate::statevector::{Gate, Statevector};

#[derive(Debug, Clone, PartialEq)]
pub struct KnnModel {
    k: usize,
    features: Vec<Vec<f64>>,
    targets: Vec<Coord>,
}

impl KnnModel {
    pub fn new(k: usize, features: Vec<Vec<f64>>, targets: Vec<Coord>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::Empty("knn training set"));
        }
        Error::check_len("knn targets", features.len(), targets.len())?;
        let dim = features[0].len();
        if let Some(row) = features.iter().find(|f| f.len() != dim) {
            return Err(Error::LengthMismatch {
                what: "knn feature row",
                expected: dim,
                got: row.len(),
            });
        }
        if k == 0 || k > features.len() {
            return Err(Error::Config(format!(
                "k = {k} must be in 1..={}",
                features.len()
            )));
        }
        Ok(KnnModel {
            k,
            features,
            targets,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    /// Mean target of the `k` rows nearest to `x` (Euclidean); equal distances
    /// resolve to the lower row index.
    pub fn predict(&self, x: &[f64]) -> Result<Coord> {
        Error::check_len("knn query", self.features[0].len(), x.len())?;
        let mut order: Vec<(f64, usize)> = self
            .features
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let d2: f64 = f.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum();
                (d2, i)
            })
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut sum = [0.0, 0.0];
        for &(_, i) in &order[..self.k] {
            sum[0] += self.targets[i][0];
            sum[1] += self.targets[i][1];
        }
        let k = self.k as f64;
        Ok([sum[0] / k, sum[1] / k])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintEntry {
    pub features: Vec<f64>,
    pub position: Coord,
    pub state: Statevector,
}

/// Database of feature-map-encoded reference fingerprints.
#[derive(Debug, Clone, PartialEq)]
pub struct FingerprintDb {
    entries: Vec<FingerprintEntry>,
}

/// Result of a fingerprint lookup.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FingerprintMatch {
    pub index: usize,
    pub fidelity: f64,
    pub position: Coord,
}

impl FingerprintDb {
    pub fn new(features: Vec<Vec<f64>>, positions: Vec<Coord>) -> Result<Self> {
        Error::check_len("fingerprint positions", features.len(), positions.len())?;
        let entries = features
            .into_iter()
            .zip(positions)
            .map(|(features, position)| {
                let state = encode(&features)?;
                Ok(FingerprintEntry {
                    features,
                    position,
                    state,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(FingerprintDb { entries })
    }

    pub fn entries(&self) -> &[FingerprintEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Fidelity of `x`'s encoded state against every entry, in entry order.
    pub fn fidelities(&self, x: &[f64]) -> Result<Vec<f64>> {
        let probe = encode(x)?;
        self.entries
            .iter()
            .map(|e| e.state.fidelity(&probe))
            .collect()
    }

    /// Highest-fidelity entry; ties resolve to the lower index.
    pub fn best_match(&self, x: &[f64]) -> Result<FingerprintMatch> {
        if self.entries.is_empty() {
            return Err(Error::Empty("fingerprint database"));
        }
        let fids = self.fidelities(x)?;
        let mut best = 0;
        for (i, &f) in fids.iter().enumerate().skip(1) {
            if f > fids[best] {
                best = i;
            }
        }
        Ok(FingerprintMatch {
            index: best,
            fidelity: fids[best],
            position: self.entries[best].position,
        })
    }

    pub fn predict(&self, x: &[f64]) -> Result<Coord> {
        Ok(self.best_match(x)?.position)
    }
}

/// Toffoli with controls `c1`, `c2` and target `t`, expressed in H, P(±π/4), CX.
fn toffoli(c1: usize, c2: usize, t: usize) -> [Gate; 15] {
    let tg = |q| Gate::p(q, FRAC_PI_4);
    let tdg = |q| Gate::p(q, -FRAC_PI_4);
    [
        Gate::h(t),
        Gate::cx(c2, t),
        tdg(t),
        Gate::cx(c1, t),
        tg(t),
        Gate::cx(c2, t),
        tdg(t),
        Gate::cx(c1, t),
        tg(c2),
        tg(t),
        Gate::h(t),
        Gate::cx(c1, c2),
        tg(c1),
        tdg(c2),
        Gate::cx(c1, c2),
    ]
}

/// Controlled swap of `a` and `b` conditioned on `control`.
pub fn controlled_swap(control: usize, a: usize, b: usize) -> Vec<Gate> {
    let mut gates = vec![Gate::cx(b, a)];
    gates.extend(toffoli(control, a, b));
    gates.push(Gate::cx(b, a));
    gates
}

/// Swap-test estimate of `|⟨a|b⟩|²` using one ancilla. The ancilla's `⟨Z⟩`
/// equals the fidelity; with `shots` set it is estimated from samples.
pub fn swap_test_fidelity(
    a: &Statevector,
    b: &Statevector,
    shots: Option<(u64, u64)>,
) -> Result<f64> {
    let n = a.n_qubits();
    Error::check_len("swap test register", n, b.n_qubits())?;
    let ancilla = 2 * n;
    let mut state = a.tensor(b)?.tensor(&Statevector::zero_state(1)?)?;
    state.apply(&Gate::h(ancilla))?;
    for q in 0..n {
        state.apply_all(&controlled_swap(ancilla, q, n + q))?;
    }
    state.apply(&Gate::h(ancilla))?;
    match shots {
        None => Ok(state.expect_z(ancilla)?.clamp(0.0, 1.0)),
        Some((shots, seed)) => state.sample_expect_z(ancilla, shots, seed),
    }
}
