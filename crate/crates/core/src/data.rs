//! RSSI fingerprint datasets: CSV ingestion, min-max feature scaling, seeded
//! splitting, and a log-distance path-loss generator for synthetic data.

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::classical::Coord;
use crate::error::{Error, Result};

pub const N_FEATURES: usize = 3;
pub const CANONICAL_HEADER: [&str; 5] = ["rssi_a", "rssi_b", "rssi_c", "x", "y"];

/// One fingerprint: three RSSI readings (dBm) and the position (m) they were taken at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RssiSample {
    pub rssi: [f64; N_FEATURES],
    pub position: Coord,
}

fn parse_field(path: &Path, line: u64, column: usize, raw: &str) -> Result<f64> {
    let value: f64 = raw.trim().parse().map_err(|_| Error::Csv {
        path: path.to_path_buf(),
        line,
        msg: format!("field {} ({raw:?}) is not a number", column + 1),
    })?;
    if !value.is_finite() {
        return Err(Error::Csv {
            path: path.to_path_buf(),
            line,
            msg: format!("field {} is not finite", column + 1),
        });
    }
    Ok(value)
}

fn csv_error(path: &Path, err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    Error::Csv {
        path: path.to_path_buf(),
        line,
        msg: err.to_string(),
    }
}

fn reader(path: &Path, has_header: bool) -> Result<csv::Reader<fs::File>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(has_header)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

/// Load canonical-schema rows `rssi_a,rssi_b,rssi_c,x,y` in file order.
pub fn load_csv(path: impl AsRef<Path>, has_header: bool) -> Result<Vec<RssiSample>> {
    let path = path.as_ref();
    let mut rdr = reader(path, has_header)?;
    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        if record.len() != 5 {
            return Err(Error::Csv {
                path: path.to_path_buf(),
                line,
                msg: format!("expected 5 fields, found {}", record.len()),
            });
        }
        let mut v = [0.0; 5];
        for (i, raw) in record.iter().enumerate() {
            v[i] = parse_field(path, line, i, raw)?;
        }
        samples.push(RssiSample {
            rssi: [v[0], v[1], v[2]],
            position: [v[3], v[4]],
        });
    }
    log::debug!("loaded {} samples from {}", samples.len(), path.display());
    Ok(samples)
}

/// Source column names for the five canonical fields, read from a small TOML
/// file such as:
///
/// ```toml
/// rssi_a = "RSSI A"
/// rssi_b = "RSSI B"
/// rssi_c = "RSSI C"
/// x = "x"
/// y = "y"
/// delimiter = ";"   # optional
/// ```
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnMapping {
    pub rssi_a: String,
    pub rssi_b: String,
    pub rssi_c: String,
    pub x: String,
    pub y: String,
    #[serde(default)]
    pub delimiter: Option<String>,
}

impl ColumnMapping {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        text.parse()
    }

    fn delimiter_byte(&self) -> Result<u8> {
        match self.delimiter.as_deref() {
            None => Ok(b','),
            Some(d) if d.len() == 1 => Ok(d.as_bytes()[0]),
            Some("\\t") | Some("tab") => Ok(b'\t'),
            Some(d) => Err(Error::Config(format!("unsupported delimiter {d:?}"))),
        }
    }
}

impl FromStr for ColumnMapping {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(format!("column mapping: {e}")))
    }
}

/// Load a headed CSV in a foreign layout, picking columns by name.
pub fn load_csv_mapped(path: impl AsRef<Path>, mapping: &ColumnMapping) -> Result<Vec<RssiSample>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .delimiter(mapping.delimiter_byte()?)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| csv_error(path, e))?.clone();
    let names = [
        &mapping.rssi_a,
        &mapping.rssi_b,
        &mapping.rssi_c,
        &mapping.x,
        &mapping.y,
    ];
    let columns = names
        .iter()
        .map(|name| {
            headers
                .iter()
                .position(|h| h == name.as_str())
                .ok_or_else(|| Error::Csv {
                    path: path.to_path_buf(),
                    line: 1,
                    msg: format!("column {name:?} not found in header"),
                })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut samples = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let mut v = [0.0; 5];
        for (slot, &col) in columns.iter().enumerate() {
            let raw = record.get(col).ok_or_else(|| Error::Csv {
                path: path.to_path_buf(),
                line,
                msg: format!("row has {} fields, column {} missing", record.len(), col + 1),
            })?;
            v[slot] = parse_field(path, line, col, raw)?;
        }
        samples.push(RssiSample {
            rssi: [v[0], v[1], v[2]],
            position: [v[3], v[4]],
        });
    }
    Ok(samples)
}

/// Write samples in the canonical schema, one header line when `header` is set.
pub fn write_csv(path: impl AsRef<Path>, samples: &[RssiSample], header: bool) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::new();
    if header {
        out.push_str(&CANONICAL_HEADER.join(","));
        out.push('\n');
    }
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.rssi[0], s.rssi[1], s.rssi[2], s.position[0], s.position[1]
        ));
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Average the RSSI readings of rows sharing a position; output keeps the
/// order in which each position first appears.
pub fn aggregate_by_position(samples: &[RssiSample]) -> Vec<RssiSample> {
    let mut groups: Vec<(Coord, [f64; N_FEATURES], usize)> = Vec::new();
    for s in samples {
        match groups.iter_mut().find(|g| g.0 == s.position) {
            Some(g) => {
                for i in 0..N_FEATURES {
                    g.1[i] += s.rssi[i];
                }
                g.2 += 1;
            }
            None => groups.push((s.position, s.rssi, 1)),
        }
    }
    groups
        .into_iter()
        .map(|(position, sum, n)| RssiSample {
            rssi: sum.map(|v| v / n as f64),
            position,
        })
        .collect()
}

/// Per-feature min-max scaler fitted on training data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub min: [f64; N_FEATURES],
    pub max: [f64; N_FEATURES],
}

impl Scaler {
    pub fn new(min: [f64; N_FEATURES], max: [f64; N_FEATURES]) -> Result<Self> {
        for i in 0..N_FEATURES {
            if !(min[i].is_finite() && max[i].is_finite()) {
                return Err(Error::NonFinite(format!("scaler bounds for feature {i}")));
            }
            if max[i] <= min[i] {
                return Err(Error::ConstantFeature(i));
            }
        }
        Ok(Scaler { min, max })
    }

    pub fn fit(train: &[RssiSample]) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::Empty("training set"));
        }
        let mut min = [f64::INFINITY; N_FEATURES];
        let mut max = [f64::NEG_INFINITY; N_FEATURES];
        for s in train {
            for i in 0..N_FEATURES {
                min[i] = min[i].min(s.rssi[i]);
                max[i] = max[i].max(s.rssi[i]);
            }
        }
        Scaler::new(min, max)
    }

    /// Map into `[0, 1]³`, clamping values outside the fitted range.
    pub fn transform(&self, rssi: &[f64; N_FEATURES]) -> [f64; N_FEATURES] {
        std::array::from_fn(|i| ((rssi[i] - self.min[i]) / (self.max[i] - self.min[i])).clamp(0.0, 1.0))
    }
}

/// A scaled, ready-to-train example.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Example {
    pub features: [f64; N_FEATURES],
    pub target: Coord,
}

pub fn to_examples(scaler: &Scaler, samples: &[RssiSample]) -> Vec<Example> {
    samples
        .iter()
        .map(|s| Example {
            features: scaler.transform(&s.rssi),
            target: s.position,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scenario {
    #[serde(rename = "Sc-1")]
    Sc1,
    #[serde(rename = "Sc-2")]
    Sc2,
    #[serde(rename = "Sc-3")]
    Sc3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Sc1, Scenario::Sc2, Scenario::Sc3];
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Scenario::Sc1 => "Sc-1",
            Scenario::Sc2 => "Sc-2",
            Scenario::Sc3 => "Sc-3",
        })
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "").as_str() {
            "sc1" => Ok(Scenario::Sc1),
            "sc2" => Ok(Scenario::Sc2),
            "sc3" => Ok(Scenario::Sc3),
            _ => Err(Error::Config(format!("unknown scenario {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Technology {
    WiFi,
    Bluetooth,
    Zigbee,
}

impl Technology {
    pub const ALL: [Technology; 3] = [Technology::Bluetooth, Technology::WiFi, Technology::Zigbee];
}

impl fmt::Display for Technology {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(match self {
            Technology::WiFi => "WiFi",
            Technology::Bluetooth => "Bluetooth",
            Technology::Zigbee => "Zigbee",
        })
    }
}

impl FromStr for Technology {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "wifi" => Ok(Technology::WiFi),
            "bluetooth" | "ble" => Ok(Technology::Bluetooth),
            "zigbee" => Ok(Technology::Zigbee),
            _ => Err(Error::Config(format!("unknown technology {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioMeta {
    pub name: Scenario,
    pub technology: Technology,
    /// `(width, height)` in meters.
    pub room: (f64, f64),
    pub n_train: usize,
    pub n_test: usize,
}

impl ScenarioMeta {
    pub fn new(name: Scenario, technology: Technology) -> Self {
        let (room, n_train, n_test) = match name {
            Scenario::Sc1 => ((6.0, 5.5), 49, 10),
            Scenario::Sc2 => ((5.8, 5.3), 16, 6),
            Scenario::Sc3 => ((10.8, 7.2), 40, 16),
        };
        ScenarioMeta {
            name,
            technology,
            room,
            n_train,
            n_test,
        }
    }

    pub fn contains(&self, p: Coord) -> bool {
        (0.0..=self.room.0).contains(&p[0]) && (0.0..=self.room.1).contains(&p[1])
    }

    /// Two transmitters on the lower corners and one mid-way along the top wall.
    pub fn default_transmitters(&self) -> [Coord; 3] {
        let (w, h) = self.room;
        [[0.0, 0.0], [w, 0.0], [w / 2.0, h]]
    }

    /// Reject samples whose position lies outside the room.
    pub fn check_bounds(&self, samples: &[RssiSample]) -> Result<()> {
        match samples.iter().position(|s| !self.contains(s.position)) {
            None => Ok(()),
            Some(i) => Err(Error::Config(format!(
                "sample {i} at {:?} lies outside the {}x{} m room",
                samples[i].position, self.room.0, self.room.1
            ))),
        }
    }
}

/// Log-distance path loss with Gaussian shadowing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathLossConfig {
    pub tx_positions: [Coord; 3],
    /// Received power at the 1 m reference distance, dBm.
    pub pl0: f64,
    pub n_exp: f64,
    /// Shadowing standard deviation, dB. Zero gives noiseless data.
    pub sigma: f64,
}

pub const REFERENCE_DISTANCE: f64 = 1.0;
pub const DEFAULT_PL0: f64 = -40.0;
pub const DEFAULT_PATH_LOSS_EXPONENT: f64 = 2.5;

impl PathLossConfig {
    pub fn new(tx_positions: [Coord; 3], sigma: f64) -> Self {
        PathLossConfig {
            tx_positions,
            pl0: DEFAULT_PL0,
            n_exp: DEFAULT_PATH_LOSS_EXPONENT,
            sigma,
        }
    }

    /// Noiseless RSSI from transmitter `tx` at position `p`.
    pub fn mean_rssi(&self, tx: usize, p: Coord) -> f64 {
        let t = self.tx_positions[tx];
        let d = ((p[0] - t[0]).powi(2) + (p[1] - t[1]).powi(2)).sqrt();
        self.pl0 - 10.0 * self.n_exp * (d.max(REFERENCE_DISTANCE) / REFERENCE_DISTANCE).log10()
    }
}

/// `n_points` samples at uniformly random positions in the room.
pub fn gen_synthetic(
    meta: &ScenarioMeta,
    model: &PathLossConfig,
    n_points: usize,
    rng_seed: u64,
) -> Result<Vec<RssiSample>> {
    if !(model.sigma >= 0.0 && model.sigma.is_finite()) {
        return Err(Error::Config(format!("sigma must be >= 0, got {}", model.sigma)));
    }
    if let Some(tx) = model.tx_positions.iter().find(|&&t| !meta.contains(t)) {
        return Err(Error::Config(format!(
            "transmitter at {tx:?} lies outside the {}x{} m room",
            meta.room.0, meta.room.1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let positions: Vec<Coord> = (0..n_points)
        .map(|_| {
            [
                rng.random_range(0.0..=meta.room.0),
                rng.random_range(0.0..=meta.room.1),
            ]
        })
        .collect();
    samples_at(model, &positions, &mut rng)
}

/// Samples at given positions, shadowing drawn from `rng`.
pub fn samples_at<R: Rng + ?Sized>(
    model: &PathLossConfig,
    positions: &[Coord],
    rng: &mut R,
) -> Result<Vec<RssiSample>> {
    let noise = Normal::new(0.0, model.sigma)
        .map_err(|e| Error::Config(format!("shadowing distribution: {e}")))?;
    Ok(positions
        .iter()
        .map(|&p| RssiSample {
            rssi: std::array::from_fn(|tx| {
                let shadow = if model.sigma > 0.0 {
                    noise.sample(rng)
                } else {
                    0.0
                };
                model.mean_rssi(tx, p) + shadow
            }),
            position: p,
        })
        .collect())
}

/// Seeded shuffle into `n_train` training and `n_test` test rows.
pub fn split_seeded(
    samples: &[RssiSample],
    n_train: usize,
    n_test: usize,
    seed: u64,
) -> Result<(Vec<RssiSample>, Vec<RssiSample>)> {
    if n_train + n_test > samples.len() {
        return Err(Error::Config(format!(
            "split of {n_train}+{n_test} needs more than the {} available rows",
            samples.len()
        )));
    }
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let train = order[..n_train].iter().map(|&i| samples[i]).collect();
    let test = order[n_train..n_train + n_test]
        .iter()
        .map(|&i| samples[i])
        .collect();
    Ok((train, test))
}

/// Shadowing level used to imitate each scenario's interference.
pub fn standin_sigma(scenario: Scenario) -> f64 {
    match scenario {
        Scenario::Sc1 => 1.0,
        Scenario::Sc2 => 4.0,
        Scenario::Sc3 => 2.5,
    }
}

/// A synthetic train/test pair sized like the scenario's published split.
pub fn synthetic_standin(meta: &ScenarioMeta, seed: u64) -> Result<(Vec<RssiSample>, Vec<RssiSample>)> {
    let model = PathLossConfig::new(meta.default_transmitters(), standin_sigma(meta.name));
    let tech_offset = match meta.technology {
        Technology::Bluetooth => 0,
        Technology::WiFi => 1,
        Technology::Zigbee => 2,
    };
    let scenario_offset = match meta.name {
        Scenario::Sc1 => 0,
        Scenario::Sc2 => 10,
        Scenario::Sc3 => 20,
    };
    let all = gen_synthetic(
        meta,
        &model,
        meta.n_train + meta.n_test,
        seed.wrapping_mul(100) + scenario_offset + tech_offset,
    )?;
    let (train, test) = all.split_at(meta.n_train);
    Ok((train.to_vec(), test.to_vec()))
}
