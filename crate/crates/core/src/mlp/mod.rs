//! Single-hidden-layer perceptrons: the float baseline, the power-of-two
//! quantized circuit model, and the training routines that connect them.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod po2;
mod qrelu;
mod train;

pub use po2::{ExponentRange, Po2Weight};
pub use qrelu::{fit_qrelu, truncation_for, QReluConfig, DEFAULT_PERCENTILE, DEFAULT_QRELU_BITS};
pub use train::{
    accuracy_float, init_float, loss_and_gradient, predict_quantized, qat_retrain, train_float, Gradient, QatConfig,
    QatOutcome, QuantContext, Quantizers, TrainConfig,
};

/// `(inputs, hidden, outputs)` widths of a single-hidden-layer network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Topology {
    pub n_inputs: usize,
    pub n_hidden: usize,
    pub n_outputs: usize,
}

impl Topology {
    pub fn new(n_inputs: usize, n_hidden: usize, n_outputs: usize) -> Result<Self> {
        if n_inputs == 0 || n_hidden == 0 || n_outputs == 0 {
            return Err(Error::InvalidConfig(alloc::format!(
                "topology ({n_inputs},{n_hidden},{n_outputs}) has an empty layer"
            )));
        }
        Ok(Topology {
            n_inputs,
            n_hidden,
            n_outputs,
        })
    }
}

impl core::fmt::Display for Topology {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "({},{},{})", self.n_inputs, self.n_hidden, self.n_outputs)
    }
}

/// A fully connected layer. `weights[neuron][input]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl DenseLayer {
    pub fn zeros(n_in: usize, n_out: usize) -> Self {
        DenseLayer {
            weights: alloc::vec![alloc::vec![0.0; n_in]; n_out],
            biases: alloc::vec![0.0; n_out],
        }
    }

    fn shape_ok(&self, n_in: usize, n_out: usize) -> bool {
        self.biases.len() == n_out && self.weights.len() == n_out && self.weights.iter().all(|r| r.len() == n_in)
    }
}

/// Real-valued network operating on inputs normalized to `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloatMlp {
    pub topology: Topology,
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

impl FloatMlp {
    pub fn zeros(topology: Topology) -> Self {
        FloatMlp {
            topology,
            hidden: DenseLayer::zeros(topology.n_inputs, topology.n_hidden),
            output: DenseLayer::zeros(topology.n_hidden, topology.n_outputs),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.topology;
        if self.hidden.shape_ok(t.n_inputs, t.n_hidden) && self.output.shape_ok(t.n_hidden, t.n_outputs) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch(alloc::format!(
                "layer shapes disagree with topology {t}"
            )))
        }
    }

    /// Class scores for one normalized input row.
    pub fn logits(&self, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = self
            .hidden
            .weights
            .iter()
            .zip(&self.hidden.biases)
            .map(|(w, b)| (dot(w, x) + b).max(0.0))
            .collect();
        self.output
            .weights
            .iter()
            .zip(&self.output.biases)
            .map(|(w, b)| dot(w, &h) + b)
            .collect()
    }

    pub fn predict(&self, x: &[f64]) -> usize {
        argmax_f64(&self.logits(x))
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax_f64(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Power-of-two layer: every multiplication becomes a shift.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantLayer {
    /// `weights[neuron][input]`
    pub weights: Vec<Vec<Po2Weight>>,
    pub biases: Vec<Po2Weight>,
}

impl QuantLayer {
    pub fn n_inputs(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn n_neurons(&self) -> usize {
        self.weights.len()
    }

    /// Fractional bits of the layer's fixed-point accumulation grid: enough
    /// to represent the smallest nonzero weight or bias exactly.
    pub fn frac_bits(&self) -> u32 {
        let min_exp = self
            .weights
            .iter()
            .flatten()
            .chain(&self.biases)
            .filter(|w| !w.is_zero())
            .map(|w| w.exponent)
            .min()
            .unwrap_or(0);
        (-i32::from(min_exp)).max(0) as u32
    }
}

/// The hardwired circuit model: power-of-two weights and biases, QRelu on
/// the hidden layer, integer inputs of `input_bits` bits.
///
/// Biases live in the same integer units as the layer's accumulator (hidden:
/// input LSBs; output: QRelu output LSBs).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantMlp {
    pub topology: Topology,
    pub input_bits: u32,
    pub qrelu: QReluConfig,
    /// `[hidden, output]`
    pub layers: Vec<QuantLayer>,
}

impl QuantMlp {
    pub fn hidden(&self) -> &QuantLayer {
        &self.layers[0]
    }

    pub fn output(&self) -> &QuantLayer {
        &self.layers[1]
    }

    /// Bit-width of the values entering layer `l`.
    pub fn layer_input_bits(&self, l: usize) -> u32 {
        if l == 0 {
            self.input_bits
        } else {
            self.qrelu.out_bits
        }
    }

    pub fn validate(&self) -> Result<()> {
        let t = self.topology;
        let bad = |msg: &str| Err(Error::DimensionMismatch(alloc::format!("{msg} (topology {t})")));
        if self.layers.len() != 2 {
            return bad("expected exactly two layers");
        }
        let shapes = [(t.n_inputs, t.n_hidden), (t.n_hidden, t.n_outputs)];
        for (layer, (n_in, n_out)) in self.layers.iter().zip(shapes) {
            if layer.biases.len() != n_out
                || layer.weights.len() != n_out
                || layer.weights.iter().any(|r| r.len() != n_in)
            {
                return bad("layer shape mismatch");
            }
        }
        if self.qrelu.truncate_lsb.len() != t.n_hidden {
            return bad("one QRelu truncation per hidden neuron required");
        }
        if !(1..=16).contains(&self.input_bits) || !(1..=16).contains(&self.qrelu.out_bits) {
            return bad("input and QRelu widths must be in 1..=16");
        }
        Ok(())
    }
}
