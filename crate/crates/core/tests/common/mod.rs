//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use hqloc::classical::Coord;
use hqloc::statevector::Gate;
use num_complex::Complex64 as C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub type Mat = Vec<Vec<C>>;

fn bit(i: usize, q: usize) -> usize {
    (i >> q) & 1
}

fn one_qubit(u: [[C; 2]; 2], q: usize, n: usize) -> Mat {
    let dim = 1 << n;
    let mut m = vec![vec![C::new(0.0, 0.0); dim]; dim];
    for (r, row) in m.iter_mut().enumerate() {
        for (c, cell) in row.iter_mut().enumerate() {
            if r & !(1 << q) == c & !(1 << q) {
                *cell = u[bit(r, q)][bit(c, q)];
            }
        }
    }
    m
}

/// Full `2^n × 2^n` unitary of one gate, qubit 0 the least significant bit.
pub fn gate_matrix(g: &Gate, n: usize) -> Mat {
    let z = C::new(0.0, 0.0);
    let re = |x: f64| C::new(x, 0.0);
    match *g {
        Gate::H { target } => {
            let h = re(FRAC_1_SQRT_2);
            one_qubit([[h, h], [h, -h]], target, n)
        }
        Gate::Ry { target, angle } => {
            let (s, c) = (angle / 2.0).sin_cos();
            one_qubit([[re(c), re(-s)], [re(s), re(c)]], target, n)
        }
        Gate::Rz { target, angle } => one_qubit(
            [[C::from_polar(1.0, -angle / 2.0), z], [z, C::from_polar(1.0, angle / 2.0)]],
            target,
            n,
        ),
        Gate::P { target, angle } => {
            one_qubit([[re(1.0), z], [z, C::from_polar(1.0, angle)]], target, n)
        }
        Gate::Cx { control, target } => {
            let dim = 1 << n;
            let mut m = vec![vec![z; dim]; dim];
            for c in 0..dim {
                let r = if bit(c, control) == 1 { c ^ (1 << target) } else { c };
                m[r][c] = re(1.0);
            }
            m
        }
    }
}

pub fn matmul(a: &Mat, b: &Mat) -> Mat {
    let n = a.len();
    let mut out = vec![vec![C::new(0.0, 0.0); n]; n];
    for i in 0..n {
        for k in 0..n {
            if a[i][k] == C::new(0.0, 0.0) {
                continue;
            }
            for j in 0..n {
                out[i][j] += a[i][k] * b[k][j];
            }
        }
    }
    out
}

pub fn identity(n: usize) -> Mat {
    let dim = 1 << n;
    (0..dim)
        .map(|r| {
            (0..dim)
                .map(|c| C::new(if r == c { 1.0 } else { 0.0 }, 0.0))
                .collect()
        })
        .collect()
}

/// Product `U_k ⋯ U_1` of a gate sequence applied in order.
pub fn circuit_unitary(gates: &[Gate], n: usize) -> Mat {
    gates
        .iter()
        .fold(identity(n), |acc, g| matmul(&gate_matrix(g, n), &acc))
}

/// State reached from |0…0⟩: the first column of the circuit unitary.
pub fn oracle_state(gates: &[Gate], n: usize) -> Vec<C> {
    circuit_unitary(gates, n).iter().map(|row| row[0]).collect()
}

pub fn oracle_expect_z(state: &[C], q: usize) -> f64 {
    state
        .iter()
        .enumerate()
        .map(|(i, a)| a.norm_sqr() * if bit(i, q) == 0 { 1.0 } else { -1.0 })
        .sum()
}

pub fn oracle_fidelity(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum::<C>().norm_sqr()
}

/// Feature map written out gate by gate: H, P(2x) on every qubit, then
/// CX · P(2(π−x_i)(π−x_{i+1})) · CX along the chain.
pub fn feature_map_gates(x: &[f64]) -> Vec<Gate> {
    let n = x.len();
    let mut g = Vec::new();
    for (q, xi) in x.iter().enumerate() {
        g.push(Gate::H { target: q });
        g.push(Gate::P { target: q, angle: 2.0 * xi });
    }
    for i in 0..n - 1 {
        g.push(Gate::Cx { control: i, target: i + 1 });
        g.push(Gate::P {
            target: i + 1,
            angle: 2.0 * (PI - x[i]) * (PI - x[i + 1]),
        });
        g.push(Gate::Cx { control: i, target: i + 1 });
    }
    g
}

/// RY layer, CX chain, RY layer.
pub fn ansatz_gates(phi: &[f64]) -> Vec<Gate> {
    let n = phi.len() / 2;
    let mut g: Vec<Gate> = (0..n).map(|q| Gate::Ry { target: q, angle: phi[q] }).collect();
    for q in 0..n - 1 {
        g.push(Gate::Cx { control: q, target: q + 1 });
    }
    g.extend((0..n).map(|q| Gate::Ry { target: q, angle: phi[n + q] }));
    g
}

/// ⟨Z_q⟩ for every qubit after feature map and ansatz.
pub fn oracle_qlayer(x: &[f64], phi: &[f64]) -> Vec<f64> {
    let mut gates = feature_map_gates(x);
    gates.extend(ansatz_gates(phi));
    let s = oracle_state(&gates, x.len());
    (0..x.len()).map(|q| oracle_expect_z(&s, q)).collect()
}

/// KNN by repeated minimum selection over (squared distance, index).
pub fn oracle_knn(k: usize, features: &[Vec<f64>], targets: &[Coord], x: &[f64]) -> Coord {
    let d2: Vec<f64> = features
        .iter()
        .map(|f| f.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum())
        .collect();
    let mut taken = vec![false; features.len()];
    let mut sum = [0.0, 0.0];
    for _ in 0..k {
        let mut best: Option<usize> = None;
        for i in 0..features.len() {
            if taken[i] {
                continue;
            }
            if best.is_none_or(|b| d2[i] < d2[b]) {
                best = Some(i);
            }
        }
        let b = best.unwrap();
        taken[b] = true;
        sum[0] += targets[b][0];
        sum[1] += targets[b][1];
    }
    [sum[0] / k as f64, sum[1] / k as f64]
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_gate<R: Rng>(rng: &mut R, n: usize) -> Gate {
    let target = rng.random_range(0..n);
    let angle = rng.random_range(-2.0 * PI..2.0 * PI);
    match rng.random_range(0..5) {
        0 => Gate::H { target },
        1 => Gate::Ry { target, angle },
        2 => Gate::Rz { target, angle },
        3 => Gate::P { target, angle },
        _ => {
            let control = (target + rng.random_range(1..n)) % n;
            Gate::Cx { control, target }
        }
    }
}

pub fn random_circuit<R: Rng>(rng: &mut R, n: usize, len: usize) -> Vec<Gate> {
    (0..len).map(|_| random_gate(rng, n)).collect()
}

/// Maximum absolute difference between amplitude vectors.
pub fn max_diff(a: &[C], b: &[C]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}
