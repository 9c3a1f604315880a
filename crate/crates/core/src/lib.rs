//! Hybrid quantum-classical neural network for RSSI fingerprint indoor
//! localization.
//!
//! A three-qubit circuit (ZZ feature map followed by a RealAmplitudes-style
//! ansatz) turns scaled RSSI readings into Pauli-Z expectations, and a small
//! dense head maps those to `(x, y)` coordinates. Everything runs on the
//! bundled exact statevector simulator; finite-shot sampling emulates
//! hardware readout. KNN, a classical MLP and quantum fingerprint matching are
//! provided as baselines.

pub mod baselines;
pub mod circuits;
pub mod classical;
pub mod cli;
pub mod data;
pub mod error;
pub mod persist;
pub mod qlayer;
pub mod optim;
pub mod statevector;
pub mod train_eval;

pub use error::{Error, Result};
