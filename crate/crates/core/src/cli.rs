//! Command-line surface: `train`, `eval`, `compare`, `gen-synthetic`.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::classical::Coord;
use crate::data::{
    aggregate_by_position, gen_synthetic, load_csv, load_csv_mapped, split_seeded, to_examples,
    write_csv, ColumnMapping, PathLossConfig, RssiSample, Scaler, Scenario, ScenarioMeta,
    Technology,
};
use crate::error::Error;
use crate::optim::OptimizerKind;
use crate::persist::{Model, ModelKind, SavedModel};
use crate::train_eval::{
    compare_all, rmse_of, rmse_sampled, train, write_loss_csv, ClassicalModel, CompareConfig,
    EarlyStop, HybridModel, TrainConfig, DEFAULT_EPOCHS, DEFAULT_LR, DEFAULT_SHOTS,
};

#[derive(Debug, Parser)]
#[command(name = "hqloc", version, about = "Hybrid quantum-classical RSSI indoor localization")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train a model on a fingerprint CSV
    Train(TrainArgs),
    /// Evaluate a trained model's RMSE on a CSV
    Eval(EvalArgs),
    /// Run every method on one scenario and write a comparison table
    Compare(CompareArgs),
    /// Generate a log-distance path-loss dataset
    GenSynthetic(GenArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Hqnn,
    Nn,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

impl From<OptimizerArg> for OptimizerKind {
    fn from(o: OptimizerArg) -> Self {
        match o {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct InputArgs {
    /// The CSV has no header line
    #[arg(long)]
    pub no_header: bool,
    /// TOML file naming the source columns for rssi_a, rssi_b, rssi_c, x, y
    #[arg(long)]
    pub mapping: Option<PathBuf>,
    /// Average repeated readings taken at the same position
    #[arg(long)]
    pub aggregate: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Training data CSV
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    #[arg(long, value_enum, default_value = "hqnn")]
    pub model: ModelArg,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    /// Learning rate
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    /// Initialization seed
    #[arg(long, env = "HQLOC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Shot count recorded for later hardware-style evaluation
    #[arg(long)]
    pub shots_eval: Option<u64>,
    /// Run every epoch instead of stopping once the loss improves by less
    /// than 1e-7 over 25 epochs
    #[arg(long)]
    pub no_early_stop: bool,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Model file written by `train`
    #[arg(long)]
    pub model: PathBuf,
    /// Test data CSV
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub input: InputArgs,
    /// Estimate expectations from this many shots instead of exactly
    #[arg(long)]
    pub shots: Option<u64>,
    /// Sampler seed
    #[arg(long, env = "HQLOC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Write the RMSE record as JSON here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Training split CSV
    #[arg(long, requires = "test", conflicts_with = "data")]
    pub train: Option<PathBuf>,
    /// Test split CSV
    #[arg(long, requires = "train")]
    pub test: Option<PathBuf>,
    /// Unsplit CSV; split with the scenario's train/test counts
    #[arg(long, required_unless_present = "train")]
    pub data: Option<PathBuf>,
    /// Seed of the train/test split when --data is used
    #[arg(long, default_value_t = 0)]
    pub split_seed: u64,
    #[command(flatten)]
    pub input: InputArgs,
    /// sc1, sc2 or sc3
    #[arg(long)]
    pub scenario: Scenario,
    /// wifi, bluetooth or zigbee
    #[arg(long)]
    pub technology: Technology,
    /// Comma-separated training seeds
    #[arg(long, value_delimiter = ',', default_value = "1,2,3")]
    pub seeds: Vec<u64>,
    #[arg(long, value_enum, default_value = "adam")]
    pub optimizer: OptimizerArg,
    #[arg(long, default_value_t = DEFAULT_LR)]
    pub lr: f64,
    #[arg(long, default_value_t = DEFAULT_EPOCHS)]
    pub epochs: usize,
    /// Shots for the sampled HQNN row
    #[arg(long, default_value_t = DEFAULT_SHOTS)]
    pub shots: u64,
    /// Comma-separated k values swept for KNN
    #[arg(long, value_delimiter = ',', default_value = "1,3,5")]
    pub knn_k: Vec<usize>,
    /// Output directory
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Room size as WIDTHxHEIGHT in meters
    #[arg(long, value_parser = parse_room)]
    pub room: (f64, f64),
    /// Transmitter positions `x,y;x,y;x,y` (default: two lower corners and top middle)
    #[arg(long, value_parser = parse_tx)]
    pub tx: Option<[Coord; 3]>,
    /// RSSI at 1 m, dBm
    #[arg(long, default_value_t = crate::data::DEFAULT_PL0, allow_hyphen_values = true)]
    pub pl0: f64,
    /// Path-loss exponent
    #[arg(long, default_value_t = crate::data::DEFAULT_PATH_LOSS_EXPONENT)]
    pub n_exp: f64,
    /// Shadowing standard deviation, dB
    #[arg(long, allow_hyphen_values = true)]
    pub sigma: f64,
    /// Number of samples
    #[arg(long)]
    pub n: usize,
    #[arg(long, env = "HQLOC_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Omit the header line
    #[arg(long)]
    pub no_header: bool,
    /// Output CSV
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_room(s: &str) -> Result<(f64, f64), String> {
    let (w, h) = s
        .split_once(['x', 'X'])
        .ok_or_else(|| format!("expected WIDTHxHEIGHT, got {s:?}"))?;
    let w: f64 = w.trim().parse().map_err(|_| format!("bad width {w:?}"))?;
    let h: f64 = h.trim().parse().map_err(|_| format!("bad height {h:?}"))?;
    if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
        return Err("room dimensions must be positive".into());
    }
    Ok((w, h))
}

fn parse_tx(s: &str) -> Result<[Coord; 3], String> {
    let points = s
        .split(';')
        .map(|p| {
            let (x, y) = p.split_once(',').ok_or_else(|| format!("bad point {p:?}"))?;
            Ok([
                x.trim().parse().map_err(|_| format!("bad coordinate {x:?}"))?,
                y.trim().parse().map_err(|_| format!("bad coordinate {y:?}"))?,
            ])
        })
        .collect::<Result<Vec<Coord>, String>>()?;
    points
        .try_into()
        .map_err(|_| "expected exactly three transmitter positions".to_string())
}

/// A command failure, split by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Runtime(e)
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Runtime(_) => 1,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "error: {e}"),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Serialize)]
struct InputDigest {
    path: String,
    sha256: String,
}

/// Provenance of one command invocation. The timestamp lives only here.
#[derive(Debug, Serialize)]
struct RunManifest<'a, C: Serialize> {
    command: &'a str,
    config: &'a C,
    dataset_digest: String,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    timestamp: String,
}

fn file_digest(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn write_manifest<C: Serialize>(
    dir: &Path,
    command: &str,
    config: &C,
    inputs: &[&Path],
    mut outputs: Vec<PathBuf>,
) -> CliResult<()> {
    let path = dir.join("manifest.json");
    outputs.push(path.clone());
    let mut combined = Sha256::new();
    let mut digests = Vec::new();
    for p in inputs {
        let d = file_digest(p)?;
        combined.update(d.as_bytes());
        digests.push(InputDigest {
            path: p.display().to_string(),
            sha256: d,
        });
    }
    let manifest = RunManifest {
        command,
        config,
        dataset_digest: hex::encode(combined.finalize()),
        inputs: digests,
        outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
        timestamp: chrono::Utc::now().to_rfc3339(),
    };
    write_json(&path, &manifest)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Config(format!("serializing {}: {e}", path.display())))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e).into())
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e).into())
}

fn load_samples(path: &Path, input: &InputArgs) -> CliResult<Vec<RssiSample>> {
    let samples = match &input.mapping {
        Some(m) => load_csv_mapped(path, &ColumnMapping::load(m)?)?,
        None => load_csv(path, !input.no_header)?,
    };
    Ok(if input.aggregate {
        aggregate_by_position(&samples)
    } else {
        samples
    })
}

fn usage_check(cond: bool, msg: impl Into<String>) -> CliResult<()> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Usage(msg.into()))
    }
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let config = TrainConfig {
        optimizer: args.optimizer.into(),
        eta: args.lr,
        epochs: args.epochs,
        seed: args.seed,
        shots_eval: args.shots_eval,
        early_stop: (!args.no_early_stop).then(EarlyStop::default),
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    if config.eta == 0.0 {
        eprintln!("warning: learning rate is 0; parameters will not change");
    }

    let samples = load_samples(&args.data, &args.input)?;
    let scaler = Scaler::fit(&samples)?;
    let examples = to_examples(&scaler, &samples);

    let (report, model) = match args.model {
        ModelArg::Hqnn => {
            let mut m = HybridModel::init(args.seed)?;
            (train(&mut m, &examples, &config)?, Model::Hqnn(m))
        }
        ModelArg::Nn => {
            let mut m = ClassicalModel::init(args.seed)?;
            (train(&mut m, &examples, &config)?, Model::Nn(m))
        }
    };

    ensure_dir(&args.out)?;
    let loss_path = args.out.join("loss.csv");
    let model_path = args.out.join("model.txt");
    write_loss_csv(&loss_path, &report.loss_per_epoch)?;
    SavedModel { scaler, model }.save(&model_path)?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        model: ModelKind,
        train: &'a TrainConfig,
        data: String,
        no_header: bool,
        aggregate: bool,
        final_train_loss: f64,
        wall_time_s: f64,
    }
    let kind = match args.model {
        ModelArg::Hqnn => ModelKind::Hqnn,
        ModelArg::Nn => ModelKind::Nn,
    };
    let resolved = Resolved {
        model: kind,
        train: &config,
        data: args.data.display().to_string(),
        no_header: args.input.no_header,
        aggregate: args.input.aggregate,
        final_train_loss: report.final_train_loss,
        wall_time_s: report.wall_time_s,
    };
    let mut inputs = vec![args.data.as_path()];
    if let Some(m) = &args.input.mapping {
        inputs.push(m.as_path());
    }
    write_manifest(&args.out, "train", &resolved, &inputs, vec![loss_path, model_path])?;

    println!(
        "trained {kind} for {} epochs: loss {:.6} -> {:.6} m^2",
        report.epochs_run(),
        report.loss_per_epoch[0],
        report.final_train_loss
    );
    Ok(())
}

#[derive(Debug, Serialize)]
struct EvalRecord {
    model: String,
    data: String,
    kind: ModelKind,
    shots: Option<u64>,
    seed: u64,
    n_test: usize,
    rmse_m: f64,
}

pub fn cmd_eval(args: &EvalArgs) -> CliResult<()> {
    usage_check(args.shots != Some(0), "--shots must be at least 1")?;
    let saved = SavedModel::load(&args.model)?;
    let samples = load_samples(&args.data, &args.input)?;
    let test = to_examples(&saved.scaler, &samples);
    let rmse = match (&saved.model, args.shots) {
        (Model::Hqnn(m), None) => rmse_of(m, &test)?,
        (Model::Hqnn(m), Some(shots)) => rmse_sampled(m, &test, shots, args.seed)?,
        (Model::Nn(m), None) => rmse_of(m, &test)?,
        (Model::Nn(_), Some(_)) => {
            return Err(CliError::Usage("--shots applies only to hqnn models".into()))
        }
    };
    let record = EvalRecord {
        model: args.model.display().to_string(),
        data: args.data.display().to_string(),
        kind: saved.model.kind(),
        shots: args.shots,
        seed: args.seed,
        n_test: test.len(),
        rmse_m: rmse,
    };
    if let Some(out) = &args.out {
        write_json(out, &record)?;
    }
    println!("rmse_m={rmse}");
    Ok(())
}

pub fn cmd_compare(args: &CompareArgs) -> CliResult<()> {
    usage_check(!args.seeds.is_empty(), "--seeds must list at least one seed")?;
    usage_check(args.epochs >= 1, "--epochs must be at least 1")?;
    usage_check(args.lr >= 0.0 && args.lr.is_finite(), "--lr must be >= 0")?;
    usage_check(args.shots >= 1, "--shots must be at least 1")?;

    let meta = ScenarioMeta::new(args.scenario, args.technology);
    let (train_samples, test_samples, inputs): (_, _, Vec<&Path>) = match (&args.train, &args.test, &args.data) {
        (Some(tr), Some(te), _) => (
            load_samples(tr, &args.input)?,
            load_samples(te, &args.input)?,
            vec![tr.as_path(), te.as_path()],
        ),
        (_, _, Some(d)) => {
            let all = load_samples(d, &args.input)?;
            let (tr, te) = split_seeded(&all, meta.n_train, meta.n_test, args.split_seed)?;
            (tr, te, vec![d.as_path()])
        }
        _ => return Err(CliError::Usage("need --train and --test, or --data".into())),
    };

    let config = CompareConfig {
        seeds: args.seeds.clone(),
        optimizer: args.optimizer.into(),
        eta: args.lr,
        epochs: args.epochs,
        shots: args.shots,
        knn_ks: args.knn_k.clone(),
    };
    let cmp = compare_all(&meta, &train_samples, &test_samples, &config)?;

    ensure_dir(&args.out)?;
    let csv_path = args.out.join("compare.csv");
    let json_path = args.out.join("compare.json");
    let table_path = args.out.join("table.txt");
    cmp.write_records_csv(&csv_path)?;
    write_json(&json_path, &cmp.records)?;
    let table = cmp.to_string();
    fs::write(&table_path, &table).map_err(|e| Error::io(&table_path, e))?;
    let mut outputs = vec![csv_path, json_path, table_path];
    for curve in &cmp.curves {
        let p = args
            .out
            .join(format!("loss_{}_seed{}.csv", curve.method, curve.seed));
        write_loss_csv(&p, &curve.trace)?;
        outputs.push(p);
    }

    #[derive(Serialize)]
    struct Resolved<'a> {
        scenario: String,
        technology: String,
        compare: &'a CompareConfig,
        config_digest: String,
        split_seed: Option<u64>,
    }
    let resolved = Resolved {
        scenario: meta.name.to_string(),
        technology: meta.technology.to_string(),
        compare: &config,
        config_digest: config.digest(),
        split_seed: args.data.as_ref().map(|_| args.split_seed),
    };
    let mut all_inputs = inputs;
    if let Some(m) = &args.input.mapping {
        all_inputs.push(m.as_path());
    }
    write_manifest(&args.out, "compare", &resolved, &all_inputs, outputs)?;
    print!("{table}");
    Ok(())
}

pub fn cmd_gen_synthetic(args: &GenArgs) -> CliResult<()> {
    usage_check(args.sigma >= 0.0, "--sigma must be >= 0")?;
    // the room bounds are all the generator needs from the scenario
    let meta = ScenarioMeta {
        room: args.room,
        ..ScenarioMeta::new(Scenario::Sc1, Technology::WiFi)
    };
    let tx = args.tx.unwrap_or_else(|| meta.default_transmitters());
    let model = PathLossConfig {
        tx_positions: tx,
        pl0: args.pl0,
        n_exp: args.n_exp,
        sigma: args.sigma,
    };
    let samples = gen_synthetic(&meta, &model, args.n, args.seed)?;
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        ensure_dir(parent)?;
    }
    write_csv(&args.out, &samples, !args.no_header)?;
    println!("wrote {} samples to {}", samples.len(), args.out.display());
    Ok(())
}

/// Parse `argv` and run the chosen command; returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Compare(a) => cmd_compare(a),
        Command::GenSynthetic(a) => cmd_gen_synthetic(a),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
