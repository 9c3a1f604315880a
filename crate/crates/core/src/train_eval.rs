//! Hybrid model, full-batch training loop, RMSE evaluation, and the
//! multi-method comparison harness.

use std::fmt;
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{FingerprintDb, KnnModel};
use crate::classical::{flatten_grads, mse_loss, Coord, DenseNet};
use crate::data::{to_examples, Example, RssiSample, Scaler, ScenarioMeta, N_FEATURES};
use crate::error::{Error, Result};
use crate::optim::{Optimizer, OptimizerKind};
use crate::qlayer::{stream_seed, QuantumLayer, N_PARAMS};

/// Hidden width of the classical head behind the quantum layer.
pub const HEAD_HIDDEN: usize = 32;
/// Hidden widths of the standalone classical baseline.
pub const BASELINE_HIDDEN: [usize; 2] = [128, 64];
pub const DEFAULT_EPOCHS: usize = 300;
pub const DEFAULT_LR: f64 = 0.001;
pub const DEFAULT_SHOTS: u64 = 4096;

/// Anything that maps scaled features to a position.
pub trait Regressor {
    fn predict(&self, x: &[f64; N_FEATURES]) -> Result<Coord>;
}

/// A model with a flat parameter vector and an exact MSE gradient.
pub trait Trainable {
    fn params(&self) -> Vec<f64>;
    fn set_params(&mut self, params: &[f64]) -> Result<()>;
    /// Batch MSE and its gradient with respect to [`Trainable::params`].
    fn loss_and_grad(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)>;
    fn loss(&self, batch: &[Example]) -> Result<f64>;
}

fn batch_mse<M: Regressor + Sync>(model: &M, batch: &[Example]) -> Result<f64> {
    let pred = batch
        .par_iter()
        .map(|e| model.predict(&e.features))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Coord> = batch.iter().map(|e| e.target).collect();
    mse_loss(&pred, &truth)
}

fn residual_upstream(out: &[f64], target: &Coord, n: usize) -> Vec<f64> {
    let scale = 2.0 / n as f64;
    vec![scale * (out[0] - target[0]), scale * (out[1] - target[1])]
}

fn squared_error(out: &[f64], target: &Coord) -> f64 {
    (out[0] - target[0]).powi(2) + (out[1] - target[1]).powi(2)
}

fn add_into(acc: &mut [f64], v: &[f64]) {
    for (a, b) in acc.iter_mut().zip(v) {
        *a += b;
    }
}

/// Quantum layer followed by a `3 → 32 (ReLU) → 2` head.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HybridModel {
    pub qlayer: QuantumLayer,
    pub head: DenseNet,
}

impl HybridModel {
    pub fn new(qlayer: QuantumLayer, head: DenseNet) -> Result<Self> {
        Error::check_len("head input", qlayer.output_dim(), head.input_dim())?;
        Error::check_len("head output", 2, head.output_dim())?;
        Ok(HybridModel { qlayer, head })
    }

    /// Seeded initialization: ansatz angles uniform in `[-1, 1]`, Glorot head.
    pub fn init(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = (0..N_PARAMS).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let qlayer = QuantumLayer::new(phi)?;
        let head = DenseNet::mlp(&[qlayer.output_dim(), HEAD_HIDDEN, 2], &mut rng)?;
        HybridModel::new(qlayer, head)
    }

    pub fn n_params(&self) -> usize {
        N_PARAMS + self.head.n_params()
    }

    pub fn forward(&self, x: &[f64; N_FEATURES]) -> Result<Coord> {
        let q = self.qlayer.forward_exact(x)?;
        let out = self.head.forward(&q)?;
        Ok([out[0], out[1]])
    }

    /// Prediction with finite-shot quantum readout.
    pub fn forward_sampled(&self, x: &[f64; N_FEATURES], shots: u64, seed: u64) -> Result<Coord> {
        let q = self.qlayer.forward_sampled(x, shots, seed)?;
        let out = self.head.forward(&q)?;
        Ok([out[0], out[1]])
    }
}

impl Regressor for HybridModel {
    fn predict(&self, x: &[f64; N_FEATURES]) -> Result<Coord> {
        self.forward(x)
    }
}

impl Trainable for HybridModel {
    fn params(&self) -> Vec<f64> {
        let mut p = self.qlayer.phi.clone();
        p.extend(self.head.params());
        p
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        Error::check_len("hybrid parameters", self.n_params(), params.len())?;
        self.qlayer.phi.copy_from_slice(&params[..N_PARAMS]);
        self.head.set_params(&params[N_PARAMS..])
    }

    /// Head gradients by backpropagation; ansatz gradients by chaining the
    /// head's input gradient through the parameter-shift Jacobian.
    fn loss_and_grad(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let n = batch.len();
        let per_sample = batch
            .par_iter()
            .map(|e| {
                let q = self.qlayer.forward_exact(&e.features)?;
                let jac = self.qlayer.gradient(&e.features)?;
                let (out, grads, dq) = self
                    .head
                    .forward_backward(&q, |out| residual_upstream(out, &e.target, n))?;
                let mut g = vec![0.0; N_PARAMS];
                for (j, row) in jac.iter().enumerate() {
                    for (k, gk) in g.iter_mut().enumerate() {
                        *gk += dq[j] * row[k];
                    }
                }
                g.extend(flatten_grads(&grads));
                Ok((squared_error(&out, &e.target), g))
            })
            .collect::<Result<Vec<_>>>()?;

        let mut total = 0.0;
        let mut grad = vec![0.0; self.n_params()];
        for (se, g) in &per_sample {
            total += se;
            add_into(&mut grad, g);
        }
        Ok((total / n as f64, grad))
    }

    fn loss(&self, batch: &[Example]) -> Result<f64> {
        batch_mse(self, batch)
    }
}

/// Standalone `3 → 128 → 64 → 2` network on the scaled features.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassicalModel {
    pub net: DenseNet,
}

impl ClassicalModel {
    pub fn init(seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dims = vec![N_FEATURES];
        dims.extend(BASELINE_HIDDEN);
        dims.push(2);
        Ok(ClassicalModel {
            net: DenseNet::mlp(&dims, &mut rng)?,
        })
    }
}

impl Regressor for ClassicalModel {
    fn predict(&self, x: &[f64; N_FEATURES]) -> Result<Coord> {
        let out = self.net.forward(x)?;
        Ok([out[0], out[1]])
    }
}

impl Trainable for ClassicalModel {
    fn params(&self) -> Vec<f64> {
        self.net.params()
    }

    fn set_params(&mut self, params: &[f64]) -> Result<()> {
        self.net.set_params(params)
    }

    fn loss_and_grad(&self, batch: &[Example]) -> Result<(f64, Vec<f64>)> {
        if batch.is_empty() {
            return Err(Error::Empty("training batch"));
        }
        let n = batch.len();
        let per_sample = batch
            .par_iter()
            .map(|e| {
                let (out, grads, _) = self
                    .net
                    .forward_backward(&e.features, |out| residual_upstream(out, &e.target, n))?;
                Ok((squared_error(&out, &e.target), flatten_grads(&grads)))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut total = 0.0;
        let mut grad = vec![0.0; self.net.n_params()];
        for (se, g) in &per_sample {
            total += se;
            add_into(&mut grad, g);
        }
        Ok((total / n as f64, grad))
    }

    fn loss(&self, batch: &[Example]) -> Result<f64> {
        batch_mse(self, batch)
    }
}

impl Regressor for KnnModel {
    fn predict(&self, x: &[f64; N_FEATURES]) -> Result<Coord> {
        KnnModel::predict(self, x)
    }
}

impl Regressor for FingerprintDb {
    fn predict(&self, x: &[f64; N_FEATURES]) -> Result<Coord> {
        FingerprintDb::predict(self, x)
    }
}

/// Stop once the loss has improved by less than `min_delta` over `window` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub window: usize,
    pub min_delta: f64,
}

impl Default for EarlyStop {
    fn default() -> Self {
        EarlyStop {
            window: 25,
            min_delta: 1e-7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub epochs: usize,
    pub seed: u64,
    pub shots_eval: Option<u64>,
    pub early_stop: Option<EarlyStop>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            optimizer: OptimizerKind::Adam,
            eta: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            seed: 0,
            shots_eval: None,
            early_stop: Some(EarlyStop::default()),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("learning rate must be >= 0, got {}", self.eta)));
        }
        if self.shots_eval == Some(0) {
            return Err(Error::ZeroShots);
        }
        if let Some(es) = self.early_stop {
            if es.window == 0 {
                return Err(Error::Config("early-stop window must be at least 1".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    /// Loss before each epoch's update; entry 0 is the initial model.
    pub loss_per_epoch: Vec<f64>,
    /// Loss after the last update.
    pub final_train_loss: f64,
    pub final_test_rmse: Option<f64>,
    pub config: TrainConfig,
    pub wall_time_s: f64,
}

impl TrainReport {
    pub fn epochs_run(&self) -> usize {
        self.loss_per_epoch.len()
    }
}

/// Full-batch training with the configured optimizer.
pub fn train<M: Trainable>(model: &mut M, train_set: &[Example], config: &TrainConfig) -> Result<TrainReport> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Empty("training set"));
    }
    let start = Instant::now();
    let mut params = model.params();
    let mut optimizer = Optimizer::new(config.optimizer, params.len(), config.eta);
    let mut trace = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let (loss, grad) = model.loss_and_grad(train_set)?;
        if !loss.is_finite() {
            return Err(Error::NonFinite(format!("training loss at epoch {epoch}")));
        }
        trace.push(loss);
        if let Some(es) = config.early_stop {
            if epoch >= es.window && trace[epoch - es.window] - loss < es.min_delta {
                log::info!("early stop at epoch {epoch}: loss {loss:.6}");
                break;
            }
        }
        optimizer.step(&mut params, &grad)?;
        model.set_params(&params)?;
    }
    let final_train_loss = model.loss(train_set)?;
    if !final_train_loss.is_finite() {
        return Err(Error::NonFinite("final training loss".into()));
    }
    Ok(TrainReport {
        loss_per_epoch: trace,
        final_train_loss,
        final_test_rmse: None,
        config: config.clone(),
        wall_time_s: start.elapsed().as_secs_f64(),
    })
}

/// `sqrt((1/n) Σ |ẑ_i − z_i|²)` over the test set.
pub fn evaluate_rmse<F>(predict: F, test: &[Example]) -> Result<f64>
where
    F: Fn(usize, &Example) -> Result<Coord> + Sync,
{
    if test.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let pred = test
        .par_iter()
        .enumerate()
        .map(|(i, e)| predict(i, e))
        .collect::<Result<Vec<_>>>()?;
    let truth: Vec<Coord> = test.iter().map(|e| e.target).collect();
    Ok(mse_loss(&pred, &truth)?.sqrt())
}

/// RMSE of a [`Regressor`] on the test set.
pub fn rmse_of<M: Regressor + Sync>(model: &M, test: &[Example]) -> Result<f64> {
    evaluate_rmse(|_, e| model.predict(&e.features), test)
}

/// RMSE of a hybrid model with sampled quantum readout. Test point `i` uses
/// sampler seed `stream_seed(seed, i)`.
pub fn rmse_sampled(model: &HybridModel, test: &[Example], shots: u64, seed: u64) -> Result<f64> {
    evaluate_rmse(
        |i, e| model.forward_sampled(&e.features, shots, stream_seed(seed, i as u64)),
        test,
    )
}

/// Write a loss trace as `epoch,mse` rows.
pub fn write_loss_csv(path: impl AsRef<Path>, trace: &[f64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("epoch,mse\n");
    for (i, l) in trace.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    ClassicalNn,
    Knn,
    QuantumFingerprint,
    HqnnExact,
    HqnnShots,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::ClassicalNn,
        Method::Knn,
        Method::QuantumFingerprint,
        Method::HqnnExact,
        Method::HqnnShots,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Method::ClassicalNn => "classical_nn",
            Method::Knn => "knn",
            Method::QuantumFingerprint => "quantum_fingerprint",
            Method::HqnnExact => "hqnn_exact",
            Method::HqnnShots => "hqnn_shots",
        }
    }

    pub fn trains(self) -> bool {
        matches!(self, Method::ClassicalNn | Method::HqnnExact | Method::HqnnShots)
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareConfig {
    pub seeds: Vec<u64>,
    pub optimizer: OptimizerKind,
    pub eta: f64,
    pub epochs: usize,
    pub shots: u64,
    pub knn_ks: Vec<usize>,
}

impl Default for CompareConfig {
    fn default() -> Self {
        CompareConfig {
            seeds: vec![1, 2, 3],
            optimizer: OptimizerKind::Adam,
            eta: DEFAULT_LR,
            epochs: DEFAULT_EPOCHS,
            shots: DEFAULT_SHOTS,
            knn_ks: vec![1, 3, 5],
        }
    }
}

impl CompareConfig {
    /// First 16 hex digits of the SHA-256 of the config's JSON form.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(&Sha256::digest(&json)[..8])
    }

    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            optimizer: self.optimizer,
            eta: self.eta,
            epochs: self.epochs,
            seed,
            shots_eval: Some(self.shots),
            early_stop: Some(EarlyStop::default()),
        }
    }
}

/// One machine-readable result row. `seed` is the seed number, or `mean`
/// for the across-seed summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRecord {
    pub scenario: String,
    pub technology: String,
    pub method: Method,
    pub rmse_m: Option<f64>,
    pub seed: String,
    pub config_digest: String,
    pub note: String,
}

/// Loss curve of one trained model, for plotting.
#[derive(Debug, Clone, PartialEq)]
pub struct LossCurve {
    pub method: Method,
    pub seed: u64,
    pub trace: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub meta: ScenarioMeta,
    pub records: Vec<ComparisonRecord>,
    pub curves: Vec<LossCurve>,
}

impl Comparison {
    /// The across-seed summary row per method, in [`Method::ALL`] order.
    pub fn summary(&self) -> Vec<&ComparisonRecord> {
        Method::ALL
            .iter()
            .filter_map(|m| self.records.iter().find(|r| r.method == *m && r.seed == "mean"))
            .collect()
    }

    pub fn mean_rmse(&self, method: Method) -> Option<f64> {
        self.records
            .iter()
            .find(|r| r.method == method && r.seed == "mean")
            .and_then(|r| r.rmse_m)
    }

    /// Smallest per-seed RMSE for `method`.
    pub fn best_rmse(&self, method: Method) -> Option<f64> {
        self.records
            .iter()
            .filter(|r| r.method == method && r.seed != "mean")
            .filter_map(|r| r.rmse_m)
            .min_by(f64::total_cmp)
    }

    pub fn write_records_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_records_csv(path, &self.records)
    }
}

pub fn write_records_csv(path: impl AsRef<Path>, records: &[ComparisonRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    for r in records {
        w.serialize(r)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

impl fmt::Display for Comparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} {}", self.meta.technology, self.meta.name)?;
        writeln!(f, "{:<22} {:>10}  note", "method", "rmse (m)")?;
        for r in self.summary() {
            let rmse = r.rmse_m.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"));
            writeln!(f, "{:<22} {:>10}  {}", r.method, rmse, r.note)?;
        }
        Ok(())
    }
}

struct MethodRun {
    per_seed: Vec<Option<f64>>,
    note: String,
}

fn failed(n: usize, err: Error) -> MethodRun {
    log::warn!("method failed: {err}");
    MethodRun {
        per_seed: vec![None; n],
        note: format!("error: {err}"),
    }
}

/// Run every method on one scenario's split. Failures of a single method
/// leave its RMSE empty and do not abort the others.
pub fn compare_all(
    meta: &ScenarioMeta,
    train_samples: &[RssiSample],
    test_samples: &[RssiSample],
    config: &CompareConfig,
) -> Result<Comparison> {
    if config.seeds.is_empty() {
        return Err(Error::Empty("seed list"));
    }
    let scaler = Scaler::fit(train_samples)?;
    let train_set = to_examples(&scaler, train_samples);
    let test_set = to_examples(&scaler, test_samples);
    if test_set.is_empty() {
        return Err(Error::Empty("test set"));
    }
    let n_seeds = config.seeds.len();
    let features: Vec<Vec<f64>> = train_set.iter().map(|e| e.features.to_vec()).collect();
    let targets: Vec<Coord> = train_set.iter().map(|e| e.target).collect();
    let mut curves = Vec::new();

    // classical NN
    let nn = config
        .seeds
        .iter()
        .map(|&seed| {
            let mut model = ClassicalModel::init(seed)?;
            let report = train(&mut model, &train_set, &config.train_config(seed))?;
            Ok((rmse_of(&model, &test_set)?, report.loss_per_epoch))
        })
        .collect::<Result<Vec<_>>>();
    let nn = match nn {
        Ok(runs) => {
            let mut per_seed = Vec::new();
            for (seed, (rmse, trace)) in config.seeds.iter().zip(runs) {
                per_seed.push(Some(rmse));
                curves.push(LossCurve {
                    method: Method::ClassicalNn,
                    seed: *seed,
                    trace,
                });
            }
            MethodRun {
                per_seed,
                note: String::new(),
            }
        }
        Err(e) => failed(n_seeds, e),
    };

    // KNN, best k of the sweep
    let knn = config
        .knn_ks
        .iter()
        .filter(|&&k| k >= 1 && k <= train_set.len())
        .map(|&k| {
            let model = KnnModel::new(k, features.clone(), targets.clone())?;
            Ok((rmse_of(&model, &test_set)?, k))
        })
        .collect::<Result<Vec<_>>>()
        .and_then(|runs| {
            runs.into_iter()
                .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
                .ok_or(Error::Config("no usable k in the knn sweep".into()))
        });
    let knn = match knn {
        Ok((rmse, k)) => MethodRun {
            per_seed: vec![Some(rmse); n_seeds],
            note: format!("k={k}"),
        },
        Err(e) => failed(n_seeds, e),
    };

    // fingerprint matching, no training
    let fp = FingerprintDb::new(features.clone(), targets.clone()).and_then(|db| rmse_of(&db, &test_set));
    let fp = match fp {
        Ok(rmse) => MethodRun {
            per_seed: vec![Some(rmse); n_seeds],
            note: "untrained".into(),
        },
        Err(e) => failed(n_seeds, e),
    };

    // HQNN, exact and shot-sampled evaluation of the same trained model
    let hq = config
        .seeds
        .iter()
        .map(|&seed| {
            let mut model = HybridModel::init(seed)?;
            let report = train(&mut model, &train_set, &config.train_config(seed))?;
            let exact = rmse_of(&model, &test_set)?;
            let sampled = rmse_sampled(&model, &test_set, config.shots, seed)?;
            Ok((exact, sampled, report.loss_per_epoch))
        })
        .collect::<Result<Vec<_>>>();
    let (hq_exact, hq_shots) = match hq {
        Ok(runs) => {
            let mut exact = Vec::new();
            let mut shots = Vec::new();
            for (seed, (e, s, trace)) in config.seeds.iter().zip(runs) {
                exact.push(Some(e));
                shots.push(Some(s));
                curves.push(LossCurve {
                    method: Method::HqnnExact,
                    seed: *seed,
                    trace,
                });
            }
            (
                MethodRun {
                    per_seed: exact,
                    note: String::new(),
                },
                MethodRun {
                    per_seed: shots,
                    note: format!("shots={}", config.shots),
                },
            )
        }
        Err(e) => {
            let note = format!("error: {e}");
            log::warn!("hqnn failed: {e}");
            (
                MethodRun {
                    per_seed: vec![None; n_seeds],
                    note: note.clone(),
                },
                MethodRun {
                    per_seed: vec![None; n_seeds],
                    note,
                },
            )
        }
    };

    let digest = config.digest();
    let mut records = Vec::new();
    for (method, run) in Method::ALL.into_iter().zip([nn, knn, fp, hq_exact, hq_shots]) {
        let row = |rmse_m: Option<f64>, seed: String| ComparisonRecord {
            scenario: meta.name.to_string(),
            technology: meta.technology.to_string(),
            method,
            rmse_m,
            seed,
            config_digest: digest.clone(),
            note: run.note.clone(),
        };
        for (seed, rmse) in config.seeds.iter().zip(&run.per_seed) {
            records.push(row(*rmse, seed.to_string()));
        }
        let mean = if run.per_seed.iter().all(Option::is_some) {
            Some(run.per_seed.iter().flatten().sum::<f64>() / n_seeds as f64)
        } else {
            None
        };
        records.push(row(mean, "mean".into()));
    }

    Ok(Comparison {
        meta: *meta,
        records,
        curves,
    })
}
