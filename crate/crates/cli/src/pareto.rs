//! Final accuracy/area analysis on the held-out set.

use bespoke_core::hdl::GateCount;
use serde::{Deserialize, Serialize};

/// One emitted design with its final measurements.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    pub id: String,
    /// Hex FNV-1a hashes identifying the chromosome and plan.
    pub chromosome_hash: String,
    pub plan_hash: String,
    pub kept_summand_bits: usize,
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub fa_estimate: u64,
    pub gates: GateCount,
    pub netlist_gate_count: f64,
    pub comparator_width_reduction: f64,
    /// Train accuracy given up by the argmax plan alone.
    pub argmax_train_loss: f64,
    pub n_comparators: usize,
    /// Vectors on which the netlist matched the reference model.
    pub verified_vectors: usize,
    /// Relative to the output directory.
    pub design: String,
}

impl ParetoPoint {
    /// More accurate on test and no larger, or smaller and no less accurate.
    pub fn dominates(&self, o: &ParetoPoint) -> bool {
        self.test_accuracy >= o.test_accuracy
            && self.netlist_gate_count <= o.netlist_gate_count
            && (self.test_accuracy > o.test_accuracy || self.netlist_gate_count < o.netlist_gate_count)
    }
}

/// Points not dominated by any other, by ascending gate count; ties keep
/// their input order.
pub fn pareto_filter(points: &[ParetoPoint]) -> Vec<ParetoPoint> {
    let mut keep: Vec<ParetoPoint> = points
        .iter()
        .filter(|p| !points.iter().any(|q| q.dominates(p)))
        .cloned()
        .collect();
    keep.sort_by(|a, b| a.netlist_gate_count.total_cmp(&b.netlist_gate_count));
    keep
}
