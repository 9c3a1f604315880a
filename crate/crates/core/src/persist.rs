//! Trained-model files: a version header followed by one named parameter
//! array per line.
//!
//! ```text
//! hqloc-model 1
//! kind hqnn
//! scaler.min 3 -80 -85 -90
//! scaler.max 3 -40 -45 -50
//! quantum.phi 6 0.1 0.2 0.3 0.4 0.5 0.6
//! layer.0 relu 32x3
//! layer.0.weight 96 ...
//! layer.0.bias 32 ...
//! layer.1 linear 2x32
//! ...
//! ```
//!
//! Floats are written in Rust's shortest round-trip form.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classical::{Activation, DenseLayer, DenseNet};
use crate::data::{Scaler, N_FEATURES};
use crate::error::{Error, Result};
use crate::qlayer::{QuantumLayer, N_PARAMS};
use crate::train_eval::{ClassicalModel, HybridModel};

pub const FORMAT_HEADER: &str = "hqloc-model 1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Hqnn,
    Nn,
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "hqnn" => Ok(ModelKind::Hqnn),
            "nn" => Ok(ModelKind::Nn),
            _ => Err(Error::Config(format!("unknown model kind {s:?}"))),
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelKind::Hqnn => "hqnn",
            ModelKind::Nn => "nn",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Hqnn(HybridModel),
    Nn(ClassicalModel),
}

impl Model {
    pub fn kind(&self) -> ModelKind {
        match self {
            Model::Hqnn(_) => ModelKind::Hqnn,
            Model::Nn(_) => ModelKind::Nn,
        }
    }

    fn net(&self) -> &DenseNet {
        match self {
            Model::Hqnn(m) => &m.head,
            Model::Nn(m) => &m.net,
        }
    }
}

/// A trained model together with the feature scaler it was trained under.
#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub scaler: Scaler,
    pub model: Model,
}

fn push_array(out: &mut String, name: &str, values: &[f64]) {
    write!(out, "{name} {}", values.len()).unwrap();
    for v in values {
        write!(out, " {v:?}").unwrap();
    }
    out.push('\n');
}

impl SavedModel {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(FORMAT_HEADER);
        out.push('\n');
        writeln!(out, "kind {}", self.model.kind()).unwrap();
        push_array(&mut out, "scaler.min", &self.scaler.min);
        push_array(&mut out, "scaler.max", &self.scaler.max);
        if let Model::Hqnn(m) = &self.model {
            push_array(&mut out, "quantum.phi", &m.qlayer.phi);
            let obs: Vec<String> = m.qlayer.observables.iter().map(|q| q.to_string()).collect();
            writeln!(out, "quantum.observables {}", obs.join(",")).unwrap();
        }
        for (i, l) in self.model.net().layers().iter().enumerate() {
            writeln!(out, "layer.{i} {} {}x{}", l.activation.name(), l.out_dim, l.in_dim).unwrap();
            push_array(&mut out, &format!("layer.{i}.weight"), &l.weights);
            push_array(&mut out, &format!("layer.{i}.bias"), &l.bias);
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|msg| Error::ModelFormat {
            path: path.to_path_buf(),
            msg,
        })
    }

    pub fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let mut next = |what: &str| {
            lines
                .next()
                .map(|(n, l)| (n + 1, l))
                .ok_or_else(|| format!("unexpected end of file, expected {what}"))
        };

        let (_, header) = next("header")?;
        if header.trim() != FORMAT_HEADER {
            return Err(format!("unsupported header {header:?}"));
        }
        let (n, kind_line) = next("kind")?;
        let kind: ModelKind = kind_line
            .strip_prefix("kind ")
            .ok_or_else(|| format!("line {n}: expected `kind`"))?
            .trim()
            .parse()
            .map_err(|e: Error| format!("line {n}: {e}"))?;

        let mut array = |name: &str, len: Option<usize>| -> std::result::Result<Vec<f64>, String> {
            let (n, line) = next(name)?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(name) {
                return Err(format!("line {n}: expected `{name}`"));
            }
            let count: usize = parts
                .next()
                .and_then(|c| c.parse().ok())
                .ok_or_else(|| format!("line {n}: missing element count"))?;
            let values = parts
                .map(|v| v.parse::<f64>().map_err(|_| format!("line {n}: bad number {v:?}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            if values.len() != count || len.is_some_and(|l| l != count) {
                return Err(format!("line {n}: `{name}` has the wrong number of values"));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(format!("line {n}: non-finite value in `{name}`"));
            }
            Ok(values)
        };

        let min = array("scaler.min", Some(N_FEATURES))?;
        let max = array("scaler.max", Some(N_FEATURES))?;
        let scaler = Scaler::new([min[0], min[1], min[2]], [max[0], max[1], max[2]])
            .map_err(|e| e.to_string())?;

        let qlayer = if kind == ModelKind::Hqnn {
            let phi = array("quantum.phi", Some(N_PARAMS))?;
            let (n, line) = next("quantum.observables")?;
            let obs = line
                .strip_prefix("quantum.observables ")
                .ok_or_else(|| format!("line {n}: expected `quantum.observables`"))?
                .split(',')
                .map(|q| q.trim().parse::<usize>().map_err(|_| format!("line {n}: bad qubit {q:?}")))
                .collect::<std::result::Result<Vec<_>, _>>()?;
            Some(QuantumLayer::with_observables(phi, obs).map_err(|e| e.to_string())?)
        } else {
            None
        };

        let mut layers = Vec::new();
        while let Some((n, line)) = lines.next() {
            let mut parts = line.split_whitespace();
            let expected = format!("layer.{}", layers.len());
            if parts.next() != Some(expected.as_str()) {
                return Err(format!("line {}: expected `{expected}`", n + 1));
            }
            let activation = parts
                .next()
                .and_then(Activation::parse)
                .ok_or_else(|| format!("line {}: bad activation", n + 1))?;
            let (out_dim, in_dim) = parts
                .next()
                .and_then(|s| s.split_once('x'))
                .and_then(|(o, i)| Some((o.parse::<usize>().ok()?, i.parse::<usize>().ok()?)))
                .ok_or_else(|| format!("line {}: bad shape", n + 1))?;
            let mut next_array = |name: String, len: usize| -> std::result::Result<Vec<f64>, String> {
                let (n, line) = lines
                    .next()
                    .map(|(n, l)| (n + 1, l))
                    .ok_or_else(|| format!("unexpected end of file, expected {name}"))?;
                let mut parts = line.split_whitespace();
                if parts.next() != Some(name.as_str()) || parts.next() != Some(len.to_string().as_str()) {
                    return Err(format!("line {n}: expected `{name} {len}`"));
                }
                let values = parts
                    .map(|v| v.parse::<f64>().map_err(|_| format!("line {n}: bad number {v:?}")))
                    .collect::<std::result::Result<Vec<_>, _>>()?;
                if values.len() != len || values.iter().any(|v| !v.is_finite()) {
                    return Err(format!("line {n}: `{name}` is malformed"));
                }
                Ok(values)
            };
            let weights = next_array(format!("{expected}.weight"), out_dim * in_dim)?;
            let bias = next_array(format!("{expected}.bias"), out_dim)?;
            layers.push(DenseLayer {
                in_dim,
                out_dim,
                weights,
                bias,
                activation,
            });
        }
        let net = DenseNet::new(layers).map_err(|e| e.to_string())?;
        if net.input_dim() != qlayer.as_ref().map_or(N_FEATURES, |q| q.output_dim()) || net.output_dim() != 2 {
            return Err("network dimensions do not fit the model kind".into());
        }
        let model = match qlayer {
            Some(q) => Model::Hqnn(HybridModel::new(q, net).map_err(|e| e.to_string())?),
            None => Model::Nn(ClassicalModel { net }),
        };
        Ok(SavedModel { scaler, model })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scaler() -> Scaler {
        Scaler::new([-80.0, -85.0, -90.0], [-40.0, -45.0, -50.5]).unwrap()
    }

    #[test]
    fn hqnn_roundtrip_is_exact() {
        let saved = SavedModel {
            scaler: scaler(),
            model: Model::Hqnn(HybridModel::init(7).unwrap()),
        };
        let text = saved.to_text();
        assert!(text.starts_with(FORMAT_HEADER));
        assert_eq!(SavedModel::parse(&text).unwrap(), saved);
    }

    #[test]
    fn nn_roundtrip_is_exact() {
        let saved = SavedModel {
            scaler: scaler(),
            model: Model::Nn(ClassicalModel::init(9).unwrap()),
        };
        assert_eq!(SavedModel::parse(&saved.to_text()).unwrap(), saved);
    }

    #[test]
    fn rejects_corruption() {
        let saved = SavedModel {
            scaler: scaler(),
            model: Model::Hqnn(HybridModel::init(7).unwrap()),
        };
        let text = saved.to_text();
        assert!(SavedModel::parse(&text.replace(FORMAT_HEADER, "hqloc-model 9")).is_err());
        assert!(SavedModel::parse(&text.replace("quantum.phi 6", "quantum.phi 5")).is_err());
        let truncated: String = text.lines().take(7).map(|l| format!("{l}\n")).collect();
        assert!(SavedModel::parse(&truncated).is_err());
        assert!(SavedModel::parse("").is_err());
    }
}
