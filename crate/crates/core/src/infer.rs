//! Bit-exact software model of the bespoke circuit.
//!
//! Each layer accumulates on a fixed-point grid with `frac_bits` fractional
//! bits, so a summand `x_i * 2^e` becomes the integer `x_i << (e + frac_bits)`.
//! Positive and negative weights feed separate accumulators that are
//! subtracted at the end. The hidden pre-activation in integer input units is
//! the accumulator floored back to the integer grid, then QRelu'd. The output
//! layer keeps its full grid value; argmax runs on those integers.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::adder_tree::{AdderTreeLayout, Chromosome, Sign};
use crate::argmax::ArgmaxPlan;
use crate::dataset::QuantizedDataset;
use crate::error::{Error, Result};
use crate::mlp::{Po2Weight, QuantLayer, QuantMlp};

/// A neuron's weights split by sign. Zero weights appear in neither list.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronPlan {
    /// `(input index, exponent)`
    pub pos_weights: Vec<(usize, i8)>,
    pub neg_weights: Vec<(usize, i8)>,
    pub bias: Po2Weight,
}

impl NeuronPlan {
    pub fn new(weights: &[Po2Weight], bias: Po2Weight) -> Self {
        let mut pos_weights = Vec::new();
        let mut neg_weights = Vec::new();
        for (i, w) in weights.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            if w.is_negative() {
                neg_weights.push((i, w.exponent));
            } else {
                pos_weights.push((i, w.exponent));
            }
        }
        NeuronPlan {
            pos_weights,
            neg_weights,
            bias,
        }
    }

    pub fn weights(&self, sign: Sign) -> &[(usize, i8)] {
        match sign {
            Sign::Pos => &self.pos_weights,
            Sign::Neg => &self.neg_weights,
        }
    }
}

pub fn neuron_plans(layer: &QuantLayer) -> Vec<NeuronPlan> {
    layer
        .weights
        .iter()
        .zip(&layer.biases)
        .map(|(w, &b)| NeuronPlan::new(w, b))
        .collect()
}

/// Kept summand bits, `kept[layer][neuron][input]`, as a bit mask over the
/// `layer_input_bits` bits of that input. Entries for zero weights are unused.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SummandMask {
    pub kept: Vec<Vec<Vec<u32>>>,
}

impl SummandMask {
    pub fn all_keep(m: &QuantMlp) -> Self {
        let kept = m
            .layers
            .iter()
            .enumerate()
            .map(|(l, layer)| {
                let full = low_mask(m.layer_input_bits(l));
                alloc::vec![alloc::vec![full; layer.n_inputs()]; layer.n_neurons()]
            })
            .collect();
        SummandMask { kept }
    }

    /// Scatters chromosome genes onto the summands they address.
    pub fn from_chromosome(m: &QuantMlp, layout: &AdderTreeLayout, c: &Chromosome) -> Result<Self> {
        if c.len() != layout.n_genes() {
            return Err(Error::ChromosomeLength {
                expected: layout.n_genes(),
                got: c.len(),
            });
        }
        let mut mask = SummandMask::all_keep(m);
        mask.check_shape(m)?;
        for tree in &layout.trees {
            let id = tree.id;
            for (r, row) in tree.rows.iter().enumerate() {
                let mut bits = 0u32;
                for b in 0..tree.row_bits {
                    if c.genes[tree.gene(r, b)] {
                        bits |= 1 << b;
                    }
                }
                let slot = mask
                    .kept
                    .get_mut(id.layer)
                    .and_then(|l| l.get_mut(id.neuron))
                    .and_then(|n| n.get_mut(row.input))
                    .ok_or_else(|| Error::ShapeMismatch(alloc::format!("layout does not match model at {id:?}")))?;
                *slot = bits;
            }
        }
        Ok(mask)
    }

    pub fn check_shape(&self, m: &QuantMlp) -> Result<()> {
        let ok = self.kept.len() == m.layers.len()
            && self
                .kept
                .iter()
                .zip(&m.layers)
                .all(|(k, layer)| k.len() == layer.n_neurons() && k.iter().all(|n| n.len() == layer.n_inputs()));
        if ok {
            Ok(())
        } else {
            Err(Error::ShapeMismatch("summand mask does not match the model".into()))
        }
    }
}

pub(crate) fn low_mask(bits: u32) -> u32 {
    if bits >= 32 {
        u32::MAX
    } else {
        (1u32 << bits) - 1
    }
}

/// Bias of a neuron as an integer on a grid with `frac_bits` fractional bits.
pub fn bias_on_grid(bias: Po2Weight, frac_bits: u32) -> i64 {
    if bias.is_zero() {
        return 0;
    }
    let mag = 1i64 << (i32::from(bias.exponent) + frac_bits as i32);
    if bias.is_negative() {
        -mag
    } else {
        mag
    }
}

/// Worst-case `(most negative, most positive)` accumulator value of a
/// neuron on its layer grid, for inputs of `in_bits` bits and no masking.
pub fn neuron_bounds(plan: &NeuronPlan, frac_bits: u32, in_bits: u32) -> (i64, i64) {
    let top = i64::from(low_mask(in_bits));
    let sum = |ws: &[(usize, i8)]| -> i64 { ws.iter().map(|&(_, e)| top << (i32::from(e) + frac_bits as i32)).sum() };
    let b = bias_on_grid(plan.bias, frac_bits);
    let (mut hi, mut lo) = (sum(&plan.pos_weights), -sum(&plan.neg_weights));
    if b > 0 {
        hi += b;
    } else {
        lo += b;
    }
    (lo, hi)
}

/// Bits needed to hold an unsigned magnitude.
pub fn unsigned_bits(v: u64) -> u32 {
    64 - v.leading_zeros()
}

/// Two's-complement width holding every value in `[lo, hi]`.
pub fn signed_width(lo: i64, hi: i64) -> u32 {
    unsigned_bits(hi.max(0) as u64).max(unsigned_bits(lo.unsigned_abs())) + 1
}

/// Accumulator width of every neuron of layer `l`.
pub fn layer_widths(m: &QuantMlp, l: usize) -> Vec<u32> {
    let layer = &m.layers[l];
    let f = layer.frac_bits();
    neuron_plans(layer)
        .iter()
        .map(|p| {
            let (lo, hi) = neuron_bounds(p, f, m.layer_input_bits(l));
            signed_width(lo, hi)
        })
        .collect()
}

/// Common width of the output-layer values fed to argmax.
pub fn output_width(m: &QuantMlp) -> u32 {
    layer_widths(m, 1).into_iter().max().unwrap_or(1)
}

#[derive(Debug, Clone, Copy)]
struct Term {
    input: usize,
    shift: u32,
    kept: u32,
    negative: bool,
}

#[derive(Debug, Clone)]
struct CompiledNeuron {
    terms: Vec<Term>,
    bias: i64,
}

#[derive(Debug, Clone)]
struct CompiledLayer {
    neurons: Vec<CompiledNeuron>,
    frac_bits: u32,
}

impl CompiledLayer {
    fn new(layer: &QuantLayer, kept: Option<&[Vec<u32>]>) -> Self {
        let f = layer.frac_bits();
        let neurons = layer
            .weights
            .iter()
            .zip(&layer.biases)
            .enumerate()
            .map(|(j, (ws, &b))| CompiledNeuron {
                terms: ws
                    .iter()
                    .enumerate()
                    .filter(|(_, w)| !w.is_zero())
                    .map(|(i, w)| Term {
                        input: i,
                        shift: (i32::from(w.exponent) + f as i32) as u32,
                        kept: kept.map_or(u32::MAX, |k| k[j][i]),
                        negative: w.is_negative(),
                    })
                    .filter(|t| t.kept != 0)
                    .collect(),
                bias: bias_on_grid(b, f),
            })
            .collect();
        CompiledLayer { neurons, frac_bits: f }
    }

    #[inline]
    fn accumulate<T: Copy + Into<i64>>(&self, x: &[T], out: &mut [i64]) {
        for (n, o) in self.neurons.iter().zip(out.iter_mut()) {
            let mut pos = 0i64;
            let mut neg = 0i64;
            for t in &n.terms {
                let v = (x[t.input].into() & i64::from(t.kept)) << t.shift;
                if t.negative {
                    neg += v;
                } else {
                    pos += v;
                }
            }
            *o = pos - neg + n.bias;
        }
    }
}

/// A model (optionally masked) compiled for fast repeated evaluation.
#[derive(Debug, Clone)]
pub struct Evaluator {
    hidden: CompiledLayer,
    output: CompiledLayer,
    qrelu: crate::mlp::QReluConfig,
    n_inputs: usize,
}

impl Evaluator {
    pub fn new(m: &QuantMlp, mask: Option<&SummandMask>) -> Result<Self> {
        m.validate()?;
        if let Some(k) = mask {
            k.check_shape(m)?;
        }
        Ok(Evaluator {
            hidden: CompiledLayer::new(m.hidden(), mask.map(|k| k.kept[0].as_slice())),
            output: CompiledLayer::new(m.output(), mask.map(|k| k.kept[1].as_slice())),
            qrelu: m.qrelu.clone(),
            n_inputs: m.topology.n_inputs,
        })
    }

    pub fn n_hidden(&self) -> usize {
        self.hidden.neurons.len()
    }

    pub fn n_outputs(&self) -> usize {
        self.output.neurons.len()
    }

    /// Output-layer grid values for one input, using `h` as scratch.
    pub fn output_values_into(&self, x: &[u32], h: &mut [i64], out: &mut [i64]) {
        debug_assert_eq!(x.len(), self.n_inputs);
        self.hidden.accumulate(x, h);
        let f = self.hidden.frac_bits;
        for (j, acc) in h.iter_mut().enumerate() {
            *acc = i64::from(self.qrelu.apply(j, *acc >> f));
        }
        self.output.accumulate(h, out);
    }

    pub fn output_values(&self, x: &[u32]) -> Vec<i64> {
        let mut h = alloc::vec![0; self.n_hidden()];
        let mut out = alloc::vec![0; self.n_outputs()];
        self.output_values_into(x, &mut h, &mut out);
        out
    }

    pub fn predict(&self, x: &[u32], plan: Option<&ArgmaxPlan>) -> usize {
        let v = self.output_values(x);
        match plan {
            Some(p) => p.select(&v),
            None => argmax_i64(&v),
        }
    }

    /// Output values for every row of `data`.
    pub fn output_matrix(&self, data: &QuantizedDataset) -> Vec<Vec<i64>> {
        let mut h = alloc::vec![0; self.n_hidden()];
        data.features
            .iter()
            .map(|x| {
                let mut out = alloc::vec![0; self.n_outputs()];
                self.output_values_into(x, &mut h, &mut out);
                out
            })
            .collect()
    }

    pub fn accuracy(&self, data: &QuantizedDataset, plan: Option<&ArgmaxPlan>) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut h = alloc::vec![0; self.n_hidden()];
        let mut out = alloc::vec![0; self.n_outputs()];
        let mut hits = 0usize;
        for (x, &y) in data.features.iter().zip(&data.labels) {
            self.output_values_into(x, &mut h, &mut out);
            let p = match plan {
                Some(p) => p.select(&out),
                None => argmax_i64(&out),
            };
            hits += usize::from(p == y);
        }
        Ok(hits as f64 / data.len() as f64)
    }
}

/// Index of the largest value; the lowest index wins ties.
pub fn argmax_i64(v: &[i64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Hidden pre-activations in integer input units (accumulator floored to
/// the integer grid), before QRelu.
pub fn hidden_preactivations(hidden: &QuantLayer, x: &[u32], pre: &mut [i64]) {
    let c = CompiledLayer::new(hidden, None);
    c.accumulate(x, pre);
    for p in pre.iter_mut() {
        *p >>= c.frac_bits;
    }
}

pub fn forward_exact(m: &QuantMlp, x: &[u32]) -> usize {
    Evaluator::new(m, None).expect("well-formed model").predict(x, None)
}

pub fn forward_masked(m: &QuantMlp, mask: &SummandMask, x: &[u32]) -> Result<usize> {
    Ok(Evaluator::new(m, Some(mask))?.predict(x, None))
}

pub fn accuracy(
    m: &QuantMlp,
    mask: Option<&SummandMask>,
    plan: Option<&ArgmaxPlan>,
    data: &QuantizedDataset,
) -> Result<f64> {
    Evaluator::new(m, mask)?.accuracy(data, plan)
}

pub fn accuracy_exact(m: &QuantMlp, data: &QuantizedDataset) -> Result<f64> {
    accuracy(m, None, None, data)
}
