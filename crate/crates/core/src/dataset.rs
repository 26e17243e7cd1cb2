//! In-memory datasets, train/test partitioning, min-max normalization and
//! fixed-width input quantization.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default share of samples that goes to the training partition.
pub const DEFAULT_TRAIN_FRACTION: f64 = 0.7;
/// Default width of quantized circuit inputs.
pub const DEFAULT_INPUT_BITS: u32 = 4;

const SPLIT_STREAM: u64 = 0x5917;

/// Per-feature min/max statistics, fitted on the training partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
}

impl Normalizer {
    pub fn fit(d: &Dataset) -> Result<Self> {
        let first = d.features.first().ok_or(Error::EmptyDataset)?;
        let mut mins = first.clone();
        let mut maxs = first.clone();
        for row in &d.features[1..] {
            for (k, &v) in row.iter().enumerate() {
                mins[k] = mins[k].min(v);
                maxs[k] = maxs[k].max(v);
            }
        }
        Ok(Normalizer { mins, maxs })
    }

    /// Maps a raw value of feature `k` to `[0, 1]`, saturating values that
    /// fall outside the fitted range. Constant features map to 0.
    pub fn apply(&self, k: usize, v: f64) -> f64 {
        let span = self.maxs[k] - self.mins[k];
        if span <= 0.0 {
            return 0.0;
        }
        ((v - self.mins[k]) / span).clamp(0.0, 1.0)
    }
}

/// A labelled feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub name: String,
    /// `[n_samples][n_features]`
    pub features: Vec<Vec<f64>>,
    /// Class of each sample, in `0..n_classes`.
    pub labels: Vec<usize>,
    pub n_classes: usize,
    /// Statistics used to produce `features`, if they were normalized.
    pub normalizer: Option<Normalizer>,
}

impl Dataset {
    pub fn new(name: impl Into<String>, features: Vec<Vec<f64>>, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if features.len() != labels.len() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} feature rows but {} labels",
                features.len(),
                labels.len()
            )));
        }
        let width = features[0].len();
        if let Some(r) = features.iter().position(|r| r.len() != width) {
            return Err(Error::DimensionMismatch(alloc::format!(
                "row {r} has {} features, expected {width}",
                features[r].len()
            )));
        }
        if let Some(&l) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::DimensionMismatch(alloc::format!(
                "label {l} outside 0..{n_classes}"
            )));
        }
        Ok(Dataset {
            name: name.into(),
            features,
            labels,
            n_classes,
            normalizer: None,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    fn subset(&self, idx: &[usize]) -> Dataset {
        Dataset {
            name: self.name.clone(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            n_classes: self.n_classes,
            normalizer: self.normalizer.clone(),
        }
    }

    /// Rescales every feature with `norm`, clamping into `[0, 1]`.
    pub fn normalized(&self, norm: &Normalizer) -> Result<Dataset> {
        if norm.mins.len() != self.n_features() {
            return Err(Error::DimensionMismatch(alloc::format!(
                "normalizer has {} features, dataset has {}",
                norm.mins.len(),
                self.n_features()
            )));
        }
        let features = self
            .features
            .iter()
            .map(|row| row.iter().enumerate().map(|(k, &v)| norm.apply(k, v)).collect())
            .collect();
        Ok(Dataset {
            features,
            normalizer: Some(norm.clone()),
            ..self.clone()
        })
    }
}

/// Shuffles `d` with a seeded stream and cuts it into `(train, test)`.
pub fn split_train_test(d: &Dataset, train_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::FractionOutOfRange(train_fraction));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = d.len();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::stream(seed, &[SPLIT_STREAM]));
    let mut n_train = libm::round(n as f64 * train_fraction) as usize;
    if n >= 2 {
        n_train = n_train.clamp(1, n - 1);
    }
    let (train, test) = idx.split_at(n_train);
    Ok((d.subset(train), d.subset(test)))
}

/// Fits min/max on the training partition and applies it to both partitions.
pub fn normalize_pair(train: &Dataset, test: &Dataset) -> Result<(Dataset, Dataset)> {
    let norm = Normalizer::fit(train)?;
    Ok((train.normalized(&norm)?, test.normalized(&norm)?))
}

/// Unsigned fixed-width circuit inputs with their labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedDataset {
    pub input_bits: u32,
    /// `[n_samples][n_features]`, each value `< 2^input_bits`.
    pub features: Vec<Vec<u32>>,
    pub labels: Vec<usize>,
}

impl QuantizedDataset {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.features.first().map_or(0, Vec::len)
    }

    pub fn max_value(&self) -> u32 {
        (1u32 << self.input_bits) - 1
    }
}

/// Quantizes a single normalized value: round to nearest on the
/// `2^bits - 1` step grid, saturating at both ends.
pub fn quantize_value(v: f64, bits: u32) -> u32 {
    let top = ((1u64 << bits) - 1) as f64;
    libm::floor(v * top + 0.5).clamp(0.0, top) as u32
}

pub fn quantize_inputs(d: &Dataset, bits: u32) -> Result<QuantizedDataset> {
    if !(1..=16).contains(&bits) {
        return Err(Error::InputBits(bits));
    }
    if d.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut features = Vec::with_capacity(d.len());
    for (row, values) in d.features.iter().enumerate() {
        let mut q = Vec::with_capacity(values.len());
        for (column, &value) in values.iter().enumerate() {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::Unnormalized { row, column, value });
            }
            q.push(quantize_value(value, bits));
        }
        features.push(q);
    }
    Ok(QuantizedDataset {
        input_bits: bits,
        features,
        labels: d.labels.clone(),
    })
}
