//! Run configuration. The JSON file mirrors the command-line flags; flags
//! given on the command line override the file.

use std::path::{Path, PathBuf};

use bespoke_core::mlp::{ExponentRange, QatConfig, Topology, TrainConfig, DEFAULT_PERCENTILE, DEFAULT_QRELU_BITS};
use bespoke_core::nsga2::GaConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// CSV file, or the name of a bundled dataset (see [`KNOWN_DATASETS`]).
    pub dataset: String,
    /// Label column index; the last column when absent.
    pub label_col: Option<usize>,
    /// `[inputs, hidden, outputs]`; taken from the bundled table when absent.
    pub topology: Option<[usize; 3]>,
    pub seed: u64,
    pub population: usize,
    pub generations: usize,
    /// Largest GA train-accuracy loss, absolute.
    pub acc_bound: f64,
    pub input_bits: u32,
    pub weight_bits: u32,
    pub out_dir: PathBuf,
    /// Caps how many GA front points get an argmax plan and a design.
    pub max_front_points: Option<usize>,
    pub train_fraction: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub float_epochs: usize,
    pub qat_epochs: usize,
    pub qrelu_bits: u32,
    /// Per-comparator train-accuracy guard of the argmax approximation.
    pub argmax_guard: f64,
    /// Accuracy-loss threshold highlighted in the report.
    pub report_threshold: f64,
    /// Random vectors per design in the equivalence check.
    pub check_vectors: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: String::new(),
            label_col: None,
            topology: None,
            seed: 0,
            population: 200,
            generations: 30,
            acc_bound: 0.15,
            input_bits: 4,
            weight_bits: 8,
            out_dir: PathBuf::from("out"),
            max_front_points: None,
            train_fraction: 0.7,
            learning_rate: 0.05,
            batch_size: 32,
            float_epochs: 500,
            qat_epochs: 50,
            qrelu_bits: DEFAULT_QRELU_BITS,
            argmax_guard: bespoke_core::argmax::DEFAULT_GUARD,
            report_threshold: 0.05,
            check_vectors: 10_000,
        }
    }
}

/// A dataset shipped with the repository, with its reference topology and
/// the float accuracy published for it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KnownDataset {
    pub name: &'static str,
    pub file: &'static str,
    pub topology: [usize; 3],
    pub reference_accuracy: f64,
}

pub const KNOWN_DATASETS: &[KnownDataset] = &[
    KnownDataset {
        name: "breast_cancer",
        file: "breast_cancer.csv",
        topology: [10, 3, 2],
        reference_accuracy: 0.980,
    },
    KnownDataset {
        name: "cardio",
        file: "cardio.csv",
        topology: [21, 3, 3],
        reference_accuracy: 0.881,
    },
    KnownDataset {
        name: "redwine",
        file: "redwine.csv",
        topology: [11, 2, 6],
        reference_accuracy: 0.564,
    },
    KnownDataset {
        name: "whitewine",
        file: "whitewine.csv",
        topology: [11, 4, 7],
        reference_accuracy: 0.537,
    },
];

pub fn known_dataset(name: &str) -> Option<&'static KnownDataset> {
    KNOWN_DATASETS.iter().find(|d| d.name == name)
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid config {path}: {source}")]
    Parse {
        path: String,
        #[source]
        source: serde_json::Error,
    },
    #[error("no dataset given")]
    NoDataset,
    #[error("dataset {0} does not exist")]
    MissingDataset(String),
    #[error("no topology given and {0} is not a bundled dataset")]
    NoTopology(String),
    #[error("invalid topology {0:?}: expected three positive integers a,b,c")]
    Topology(String),
    #[error("{0}")]
    Invalid(String),
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.display().to_string(),
            source,
        })
    }

    /// The CSV file this config reads. Bundled names resolve against
    /// `data_dir`; anything else is a path.
    pub fn dataset_path(&self, data_dir: &Path) -> PathBuf {
        match known_dataset(&self.dataset) {
            Some(k) if !Path::new(&self.dataset).exists() => data_dir.join(k.file),
            _ => PathBuf::from(&self.dataset),
        }
    }

    /// Short identifier used for module and file names.
    pub fn dataset_id(&self) -> String {
        let stem = Path::new(&self.dataset)
            .file_stem()
            .map_or_else(|| self.dataset.clone(), |s| s.to_string_lossy().into_owned());
        let id: String = stem
            .chars()
            .map(|c| {
                if c.is_ascii_alphanumeric() {
                    c.to_ascii_lowercase()
                } else {
                    '_'
                }
            })
            .collect();
        if id.starts_with(|c: char| c.is_ascii_alphabetic()) {
            id
        } else {
            format!("d_{id}")
        }
    }

    pub fn resolved_topology(&self) -> Result<Topology, ConfigError> {
        let [a, b, c] = match (self.topology, known_dataset(&self.dataset_id())) {
            (Some(t), _) => t,
            (None, Some(k)) => k.topology,
            (None, None) => return Err(ConfigError::NoTopology(self.dataset.clone())),
        };
        Topology::new(a, b, c).map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    /// Checks everything that can be checked before any stage runs.
    pub fn validate(&self, data_dir: &Path) -> Result<(), ConfigError> {
        if self.dataset.is_empty() {
            return Err(ConfigError::NoDataset);
        }
        let path = self.dataset_path(data_dir);
        if !path.is_file() {
            return Err(ConfigError::MissingDataset(path.display().to_string()));
        }
        self.resolved_topology()?;
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return bad(format!("train_fraction {} is outside (0, 1)", self.train_fraction));
        }
        if !(1..=16).contains(&self.input_bits) {
            return bad(format!("input_bits {} is outside 1..=16", self.input_bits));
        }
        if !(2..=8).contains(&self.weight_bits) {
            return bad(format!("weight_bits {} is outside 2..=8", self.weight_bits));
        }
        if !(1..=16).contains(&self.qrelu_bits) {
            return bad(format!("qrelu_bits {} is outside 1..=16", self.qrelu_bits));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive".into());
        }
        if self.max_front_points == Some(0) {
            return bad("max_front_points must be positive".into());
        }
        self.ga().validate().map_err(|e| ConfigError::Invalid(e.to_string()))
    }

    pub fn train(&self) -> TrainConfig {
        TrainConfig {
            learning_rate: self.learning_rate,
            epochs: self.float_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn qat(&self) -> QatConfig {
        QatConfig {
            learning_rate: self.learning_rate,
            epochs: self.qat_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
            qrelu_bits: self.qrelu_bits,
            qrelu_percentile: DEFAULT_PERCENTILE,
            exponents: ExponentRange::from_weight_bits(self.weight_bits),
        }
    }

    pub fn ga(&self) -> GaConfig {
        GaConfig {
            population_size: self.population,
            generations: self.generations,
            accuracy_loss_bound: self.acc_bound,
            seed: self.seed,
            ..GaConfig::default()
        }
    }
}

/// Parses `a,b,c`.
pub fn parse_topology(s: &str) -> Result<[usize; 3], ConfigError> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| ConfigError::Topology(s.into()))?;
    match parts[..] {
        [a, b, c] if a > 0 && b > 0 && c > 0 => Ok([a, b, c]),
        _ => Err(ConfigError::Topology(s.into())),
    }
}
