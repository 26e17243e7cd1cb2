use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::QuantLayer;
use crate::dataset::QuantizedDataset;
use crate::infer;

pub const DEFAULT_QRELU_BITS: u32 = 8;
/// Share of positive pre-activations that must fit the retained bits.
pub const DEFAULT_PERCENTILE: f64 = 0.99;

/// Quantized Relu of the hidden layer: negative values are nullified,
/// `truncate_lsb[j]` low bits of neuron `j` are dropped, and anything above
/// `2^out_bits - 1` saturates.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QReluConfig {
    pub out_bits: u32,
    pub truncate_lsb: Vec<u32>,
}

impl QReluConfig {
    pub fn identity(n_hidden: usize) -> Self {
        QReluConfig {
            out_bits: DEFAULT_QRELU_BITS,
            truncate_lsb: alloc::vec![0; n_hidden],
        }
    }

    pub fn max_output(&self) -> u32 {
        (1u32 << self.out_bits) - 1
    }

    /// `pre` is the neuron's pre-activation in integer input units.
    pub fn apply(&self, neuron: usize, pre: i64) -> u32 {
        if pre <= 0 {
            return 0;
        }
        let shifted = pre >> self.truncate_lsb[neuron].min(62);
        shifted.min(i64::from(self.max_output())) as u32
    }
}

/// Smallest truncation that brings the `percentile` quantile of the positive
/// values under `2^out_bits`. Non-positive values are ignored.
pub fn truncation_for(values: &[i64], out_bits: u32, percentile: f64) -> u32 {
    let mut pos: Vec<i64> = values.iter().copied().filter(|&v| v > 0).collect();
    if pos.is_empty() {
        return 0;
    }
    pos.sort_unstable();
    let rank = libm::ceil(percentile.clamp(0.0, 1.0) * pos.len() as f64) as usize;
    let q = pos[rank.clamp(1, pos.len()) - 1];
    let mut t = 0;
    while (q >> t) > (1i64 << out_bits) - 1 {
        t += 1;
    }
    t
}

/// Profiles the hidden pre-activations of `hidden` on `train` and picks a
/// per-neuron truncation.
pub fn fit_qrelu(hidden: &QuantLayer, train: &QuantizedDataset, out_bits: u32, percentile: f64) -> QReluConfig {
    let n = hidden.n_neurons();
    let mut per_neuron: Vec<Vec<i64>> = alloc::vec![Vec::with_capacity(train.len()); n];
    let mut pre = alloc::vec![0i64; n];
    for x in &train.features {
        infer::hidden_preactivations(hidden, x, &mut pre);
        for (acc, v) in per_neuron.iter_mut().zip(&pre) {
            acc.push(*v);
        }
    }
    QReluConfig {
        out_bits,
        truncate_lsb: per_neuron
            .iter()
            .map(|v| truncation_for(v, out_bits, percentile))
            .collect(),
    }
}
