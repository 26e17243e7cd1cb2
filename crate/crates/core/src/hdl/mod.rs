//! Circuit generation: an elaborated design shared by the Verilog emitter
//! and the gate-level netlist used for cost measurement and equivalence
//! checking.

mod design;
mod netlist;
mod verilog;

pub use design::{elaborate, ArgmaxDesign, Design, NeuronDesign, Summand, TreeDesign};
pub use netlist::{build_netlist, Bus, Cell, CellKind, GateCount, Netlist, NetlistBuilder, Port, Signal};
pub use verilog::{emit_design, emit_verilog, is_identifier, summand_expr, EmitConfig, Provenance};

use crate::adder_tree::{AdderTreeLayout, Chromosome};
use crate::argmax::ArgmaxPlan;
use crate::error::Result;
use crate::infer::output_width;
use crate::mlp::QuantMlp;
use crate::rng::Fnv64;

/// Makes sure `plan` costs no more gates than exact argmax. Thinned
/// comparators are widened back to every bit, first to last, while the
/// netlist is still larger; the full-width bracket is the last resort.
pub fn settle_plan(m: &QuantMlp, layout: &AdderTreeLayout, c: &Chromosome, plan: &ArgmaxPlan) -> Result<ArgmaxPlan> {
    let exact = ArgmaxPlan::full_width(m.topology.n_outputs, output_width(m));
    let limit = build_netlist(m, layout, c, Some(&exact))?.gate_count().total();
    let cost = |p: &ArgmaxPlan| -> Result<u64> { Ok(build_netlist(m, layout, c, Some(p))?.gate_count().total()) };
    let mut best = plan.clone();
    let mut best_cost = cost(&best)?;
    if best_cost <= limit {
        return Ok(best);
    }
    let all: alloc::vec::Vec<u32> = (0..plan.width).collect();
    for s in 0..plan.stages.len() {
        for k in 0..plan.stages[s].len() {
            if best.stages[s][k].kept_bits == all {
                continue;
            }
            let mut trial = best.clone();
            trial.stages[s][k].kept_bits = all.clone();
            let t = cost(&trial)?;
            if t < best_cost {
                best = trial;
                best_cost = t;
                if best_cost <= limit {
                    return Ok(best);
                }
            }
        }
    }
    Ok(exact)
}

/// Stable 64-bit fingerprint of a quantized model.
pub fn model_hash(m: &QuantMlp) -> u64 {
    let mut h = Fnv64::default();
    let t = m.topology;
    for v in [t.n_inputs, t.n_hidden, t.n_outputs] {
        h.write_i64(v as i64);
    }
    h.write_i64(i64::from(m.input_bits));
    h.write_i64(i64::from(m.qrelu.out_bits));
    for &t in &m.qrelu.truncate_lsb {
        h.write_i64(i64::from(t));
    }
    for layer in &m.layers {
        for w in layer.weights.iter().flatten().chain(&layer.biases) {
            h.write(&[w.sign as u8, w.exponent as u8]);
        }
    }
    h.finish()
}

pub fn chromosome_hash(c: &Chromosome) -> u64 {
    let mut h = Fnv64::default();
    h.write_i64(c.len() as i64);
    for &g in &c.genes {
        h.write(&[u8::from(g)]);
    }
    h.finish()
}

pub fn plan_hash(p: &ArgmaxPlan) -> u64 {
    let mut h = Fnv64::default();
    h.write_i64(p.n_outputs as i64);
    h.write_i64(i64::from(p.width));
    for stage in &p.stages {
        h.write_i64(stage.len() as i64);
        for c in stage {
            h.write_i64(c.a as i64);
            h.write_i64(c.b as i64);
            h.write_i64(c.kept_bits.len() as i64);
            for &b in &c.kept_bits {
                h.write_i64(i64::from(b));
            }
        }
    }
    h.finish()
}
