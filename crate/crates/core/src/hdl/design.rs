use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::argmax::ArgmaxPlan;
use crate::error::{Error, Result};
use crate::infer::{self, neuron_bounds, neuron_plans, signed_width, unsigned_bits, SummandMask};
use crate::mlp::QuantMlp;

/// One shifted, masked operand of an adder tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summand {
    pub input: usize,
    /// Position of the operand's LSB on the layer grid.
    pub shift: u32,
    /// Kept bits of the operand; cleared bits are wired to constant zero.
    pub kept: u32,
    pub src_bits: u32,
}

/// Unsigned multi-operand sum of one sign of a neuron.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeDesign {
    /// Only summands with at least one kept bit.
    pub summands: Vec<Summand>,
    /// Bias magnitude on the grid when the bias has this tree's sign.
    pub constant: u64,
    /// Unsigned width holding the unmasked worst case.
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NeuronDesign {
    /// Two's-complement accumulator width.
    pub width: u32,
    pub pos: TreeDesign,
    pub neg: TreeDesign,
    /// QRelu truncation (hidden neurons only).
    pub truncate_lsb: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArgmaxDesign {
    pub plan: ArgmaxPlan,
    pub class_bits: u32,
}

/// A model with its summand mask and argmax bracket resolved into widths,
/// shifts and constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Design {
    pub n_inputs: usize,
    pub input_bits: u32,
    pub hidden_frac_bits: u32,
    pub qrelu_bits: u32,
    pub hidden: Vec<NeuronDesign>,
    pub output: Vec<NeuronDesign>,
    /// Common width the output values are sign-extended to.
    pub output_width: u32,
    /// `None` exposes the raw output values instead of a class index.
    pub argmax: Option<ArgmaxDesign>,
}

fn layer_design(m: &QuantMlp, mask: &SummandMask, l: usize) -> Vec<NeuronDesign> {
    let layer = &m.layers[l];
    let f = layer.frac_bits();
    let src_bits = m.layer_input_bits(l);
    let top = u64::from(infer::low_mask(src_bits));
    neuron_plans(layer)
        .iter()
        .enumerate()
        .map(|(j, plan)| {
            let bias = infer::bias_on_grid(plan.bias, f);
            let tree = |ws: &[(usize, i8)], constant: u64| {
                let shift_of = |e: i8| (i32::from(e) + f as i32) as u32;
                let max: u64 = ws.iter().map(|&(_, e)| top << shift_of(e)).sum::<u64>() + constant;
                TreeDesign {
                    summands: ws
                        .iter()
                        .map(|&(input, e)| Summand {
                            input,
                            shift: shift_of(e),
                            kept: mask.kept[l][j][input] & top as u32,
                            src_bits,
                        })
                        .filter(|s| s.kept != 0)
                        .collect(),
                    constant,
                    width: unsigned_bits(max).max(1),
                }
            };
            let (lo, hi) = neuron_bounds(plan, f, src_bits);
            NeuronDesign {
                width: signed_width(lo, hi),
                pos: tree(&plan.pos_weights, bias.max(0) as u64),
                neg: tree(&plan.neg_weights, bias.min(0).unsigned_abs()),
                truncate_lsb: (l == 0).then(|| m.qrelu.truncate_lsb[j]),
            }
        })
        .collect()
}

/// Resolves `m` under `mask` into a circuit description. With a plan the
/// design ends in that comparator bracket, otherwise in the raw outputs.
pub fn elaborate(m: &QuantMlp, mask: &SummandMask, plan: Option<&ArgmaxPlan>) -> Result<Design> {
    m.validate()?;
    mask.check_shape(m)?;
    let output_width = infer::output_width(m);
    let argmax = match plan {
        Some(p) => {
            p.validate()?;
            if p.n_outputs != m.topology.n_outputs {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "plan has {} candidates, model has {} outputs",
                    p.n_outputs,
                    m.topology.n_outputs
                )));
            }
            if p.width != output_width {
                return Err(Error::ShapeMismatch(alloc::format!(
                    "plan compares {} bits, outputs are {output_width} bits wide",
                    p.width
                )));
            }
            Some(ArgmaxDesign {
                plan: p.clone(),
                class_bits: unsigned_bits(m.topology.n_outputs as u64 - 1).max(1),
            })
        }
        None => None,
    };
    Ok(Design {
        n_inputs: m.topology.n_inputs,
        input_bits: m.input_bits,
        hidden_frac_bits: m.hidden().frac_bits(),
        qrelu_bits: m.qrelu.out_bits,
        hidden: layer_design(m, mask, 0),
        output: layer_design(m, mask, 1),
        output_width,
        argmax,
    })
}
