//! Train/test separation by type. Everything up to the final assessment
//! takes a [`TrainSplit`]; the test partition sits in a [`HeldOut`] whose only
//! reader is [`HeldOut::assess`], and every read is counted.

use std::cell::Cell;

use bespoke_core::dataset::{normalize_pair, quantize_inputs, split_train_test, Dataset, Normalizer, QuantizedDataset};
use bespoke_core::Result;

/// Normalized train features and their quantized circuit inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainSplit {
    pub normalized: Dataset,
    pub quantized: QuantizedDataset,
}

impl TrainSplit {
    pub fn normalizer(&self) -> &Normalizer {
        self.normalized.normalizer.as_ref().expect("train split is normalized")
    }
}

/// The test partition, reachable only through [`HeldOut::assess`].
#[derive(Debug)]
pub struct HeldOut {
    normalized: Dataset,
    quantized: QuantizedDataset,
    reads: Cell<usize>,
}

impl HeldOut {
    pub fn len(&self) -> usize {
        self.quantized.len()
    }

    pub fn is_empty(&self) -> bool {
        self.quantized.is_empty()
    }

    /// How many times the test data has been handed out.
    pub fn reads(&self) -> usize {
        self.reads.get()
    }

    /// Runs `f` on the normalized and quantized test data.
    pub fn assess<T>(&self, f: impl FnOnce(&Dataset, &QuantizedDataset) -> T) -> T {
        self.reads.set(self.reads.get() + 1);
        f(&self.normalized, &self.quantized)
    }
}

/// Split, normalize with train statistics, quantize.
pub fn prepare(d: &Dataset, train_fraction: f64, seed: u64, input_bits: u32) -> Result<(TrainSplit, HeldOut)> {
    let (train, test) = split_train_test(d, train_fraction, seed)?;
    let (train, test) = normalize_pair(&train, &test)?;
    let train_q = quantize_inputs(&train, input_bits)?;
    let test_q = quantize_inputs(&test, input_bits)?;
    Ok((
        TrainSplit {
            normalized: train,
            quantized: train_q,
        },
        HeldOut {
            normalized: test,
            quantized: test_q,
            reads: Cell::new(0),
        },
    ))
}
