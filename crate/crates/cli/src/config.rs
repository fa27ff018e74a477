//! Run configuration: a line-oriented `key = value` file plus flag overrides.
//!
//! Blank lines and lines starting with `#` are skipped. Keys and their
//! defaults:
//!
//! | key               | default    | meaning                                         |
//! |-------------------|------------|-------------------------------------------------|
//! | `dataset`         | `mnist`    | `mnist`, `blobs` or `xor`                       |
//! | `data_dir`        | (empty)    | MNIST directory; falls back to `SOFTFOREST_DATA_DIR` |
//! | `synthetic_points`| `100`      | points per cluster for `blobs` / `xor`          |
//! | `synthetic_noise` | `0.5`      | cluster standard deviation                      |
//! | `subset`          | `0`        | train on the first N samples after a seeded shuffle (0 = all) |
//! | `layers`          | `1`        | tree-bearing layers                             |
//! | `trees`           | `1`        | trees per layer                                 |
//! | `variant`         | `budding`  | `soft`, `budding` or `distributed`              |
//! | `depth`           | `5`        | maximum tree depth                              |
//! | `filters`         | `1`        | gating filters per internal node                |
//! | `learning_rate`   | `0.1`      |                                                 |
//! | `momentum`        | `0.9`      |                                                 |
//! | `batch_size`      | `64`       |                                                 |
//! | `epochs`          | `20`       |                                                 |
//! | `lr_decay_factor` | `0.5`      |                                                 |
//! | `lr_decay_every`  | `8`        | epochs between decays                           |
//! | `augment_copies`  | `1`        | augmented copies per training image (0 = off)   |
//! | `augment_shift`   | `2`        | max shift in pixels                             |
//! | `augment_rotation`| `15`       | max rotation in degrees                         |
//! | `augment_shear`   | `0.1`      | max shear factor                                |
//! | `seed`            | `0`        |                                                 |
//! | `workers`         | `1`        | threads for tree training and evaluation        |
//! | `model`           | `model.bin`| model output path                               |
//! | `metrics`         | `metrics.csv` | metrics CSV output path                      |

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use softforest::data::AugmentConfig;
use softforest::training::TrainConfig;
use softforest::{LayerSpec, Variant};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ConfigError {
    pub key: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "config key `{}` (line {line}): {}", self.key, self.message),
            None => write!(f, "config key `{}`: {}", self.key, self.message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetKind {
    Mnist,
    Blobs,
    Xor,
}

impl DatasetKind {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetKind::Mnist => "mnist",
            DatasetKind::Blobs => "blobs",
            DatasetKind::Xor => "xor",
        }
    }

    /// `(input_dim, class_count)` of the dataset.
    pub fn shape(self) -> (usize, usize) {
        match self {
            DatasetKind::Mnist => (784, 10),
            DatasetKind::Blobs | DatasetKind::Xor => (2, 2),
        }
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "mnist" => Ok(DatasetKind::Mnist),
            "blobs" => Ok(DatasetKind::Blobs),
            "xor" => Ok(DatasetKind::Xor),
            _ => Err("expected mnist, blobs or xor".into()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: DatasetKind,
    pub data_dir: Option<PathBuf>,
    pub synthetic_points: usize,
    pub synthetic_noise: f64,
    pub subset: usize,
    pub layers: usize,
    pub trees: usize,
    pub variant: Variant,
    pub depth: usize,
    pub filters: usize,
    pub train: TrainConfig,
    pub augment: AugmentConfig,
    pub seed: u64,
    pub workers: usize,
    pub model: PathBuf,
    pub metrics: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetKind::Mnist,
            data_dir: None,
            synthetic_points: 100,
            synthetic_noise: 0.5,
            subset: 0,
            layers: 1,
            trees: 1,
            variant: Variant::Budding,
            depth: 5,
            filters: 1,
            train: TrainConfig::default(),
            augment: AugmentConfig::default(),
            seed: 0,
            workers: 1,
            model: PathBuf::from("model.bin"),
            metrics: PathBuf::from("metrics.csv"),
        }
    }
}

pub const KEYS: &[&str] = &[
    "dataset",
    "data_dir",
    "synthetic_points",
    "synthetic_noise",
    "subset",
    "layers",
    "trees",
    "variant",
    "depth",
    "filters",
    "learning_rate",
    "momentum",
    "batch_size",
    "epochs",
    "lr_decay_factor",
    "lr_decay_every",
    "augment_copies",
    "augment_shift",
    "augment_rotation",
    "augment_shear",
    "seed",
    "workers",
    "model",
    "metrics",
];

fn parse<T: FromStr>(value: &str) -> Result<T, String> {
    value.parse().map_err(|_| format!("cannot parse `{value}`"))
}

fn at_least(value: &str, min: usize) -> Result<usize, String> {
    let v: usize = parse(value)?;
    if v < min {
        return Err(format!("must be at least {min}, got {v}"));
    }
    Ok(v)
}

fn real(value: &str, ok: impl Fn(f64) -> bool, range: &str) -> Result<f64, String> {
    let v: f64 = parse(value)?;
    if !v.is_finite() || !ok(v) {
        return Err(format!("must lie in {range}, got {value}"));
    }
    Ok(v)
}

impl RunConfig {
    /// Sets one key, validating its value.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.apply(key, value).map_err(|message| ConfigError {
            key: key.to_string(),
            line: None,
            message,
        })
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "dataset" => self.dataset = value.parse()?,
            "data_dir" => self.data_dir = (!value.is_empty()).then(|| PathBuf::from(value)),
            "synthetic_points" => self.synthetic_points = at_least(value, 1)?,
            "synthetic_noise" => self.synthetic_noise = real(value, |v| v >= 0.0, "[0, inf)")?,
            "subset" => self.subset = parse(value)?,
            "layers" => self.layers = at_least(value, 1)?,
            "trees" => self.trees = at_least(value, 1)?,
            "variant" => {
                self.variant = value
                    .parse()
                    .map_err(|_| "expected soft, budding or distributed".to_string())?
            }
            "depth" => {
                let d: usize = parse(value)?;
                if d > softforest::tree::MAX_SUPPORTED_DEPTH {
                    return Err(format!(
                        "must be at most {}, got {d}",
                        softforest::tree::MAX_SUPPORTED_DEPTH
                    ));
                }
                self.depth = d;
            }
            "filters" => self.filters = at_least(value, 1)?,
            "learning_rate" => self.train.learning_rate = real(value, |v| v > 0.0, "(0, inf)")?,
            "momentum" => self.train.momentum = real(value, |v| (0.0..1.0).contains(&v), "[0, 1)")?,
            "batch_size" => self.train.batch_size = at_least(value, 1)?,
            "epochs" => self.train.epochs = at_least(value, 1)?,
            "lr_decay_factor" => self.train.lr_decay_factor = real(value, |v| v > 0.0 && v <= 1.0, "(0, 1]")?,
            "lr_decay_every" => self.train.lr_decay_every = at_least(value, 1)?,
            "augment_copies" => self.augment.copies_per_sample = parse(value)?,
            "augment_shift" => self.augment.max_shift_px = parse(value)?,
            "augment_rotation" => self.augment.max_rotation_deg = real(value, |v| v >= 0.0, "[0, inf)")?,
            "augment_shear" => self.augment.max_shear = real(value, |v| v >= 0.0, "[0, inf)")?,
            "seed" => self.seed = parse(value)?,
            "workers" => self.workers = at_least(value, 1)?,
            "model" => self.model = PathBuf::from(value),
            "metrics" => self.metrics = PathBuf::from(value),
            _ => return Err(format!("unknown key (known keys: {})", KEYS.join(", "))),
        }
        Ok(())
    }

    /// Checks constraints that span several keys.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.dataset != DatasetKind::Mnist && self.augment.copies_per_sample > 0 {
            return Err(ConfigError {
                key: "augment_copies".into(),
                line: None,
                message: format!(
                    "augmentation needs square images; set it to 0 for the {} dataset",
                    self.dataset.as_str()
                ),
            });
        }
        Ok(())
    }

    pub fn layer_specs(&self) -> Vec<LayerSpec> {
        let spec = LayerSpec {
            tree_count: self.trees,
            variant: self.variant,
            max_depth: self.depth,
            filters_per_node: self.filters,
        };
        vec![spec; self.layers]
    }

    /// Training settings; the seed is the run seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn augment_config(&self) -> AugmentConfig {
        AugmentConfig {
            seed: self.seed,
            ..self.augment
        }
    }
}

/// Parses a configuration file on top of the defaults.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut config = RunConfig::default();
    let mut seen: Vec<&str> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |key: &str, message: String| ConfigError {
            key: key.to_string(),
            line: Some(i + 1),
            message,
        };
        let Some((key, value)) = line.split_once('=') else {
            return Err(err(line, "expected `key = value`".into()));
        };
        let (key, value) = (key.trim(), value.trim());
        if seen.contains(&key) {
            return Err(err(key, "set more than once".into()));
        }
        config.apply(key, value).map_err(|m| err(key, m))?;
        seen.push(key);
    }
    Ok(config)
}
