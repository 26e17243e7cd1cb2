//! Human-readable summaries of a finished run.

use std::fmt::Write;

use crate::pipeline::{fa_reduction, Manifest, Timings};

/// One row per emitted design. Accuracy loss is measured against the exact
/// design's test accuracy, reductions against the all-keep adder trees and
/// the full-width comparators. Derived only from the manifest, so a report
/// regenerated from a saved manifest is byte-identical.
pub fn report_csv(m: &Manifest) -> String {
    let exact = m.points.iter().find(|p| p.id == "exact");
    let base_acc = exact.map_or(m.quantized_model.test_accuracy, |p| p.test_accuracy);
    let base_gates = exact.map_or(0.0, |p| p.netlist_gate_count);
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "id",
        "train_accuracy",
        "test_accuracy",
        "accuracy_loss",
        "fa_estimate",
        "fa_reduction",
        "netlist_gate_count",
        "gate_reduction",
        "comparator_width_reduction",
        "argmax_train_loss",
        "pareto",
        "within_threshold",
        "chromosome_hash",
        "plan_hash",
        "design",
    ])
    .expect("in-memory write");
    for p in &m.points {
        let loss = base_acc - p.test_accuracy;
        let gate_red = if p.netlist_gate_count > 0.0 {
            base_gates / p.netlist_gate_count
        } else {
            base_gates
        };
        w.write_record([
            p.id.clone(),
            format!("{:.4}", p.train_accuracy),
            format!("{:.4}", p.test_accuracy),
            format!("{loss:.4}"),
            p.fa_estimate.to_string(),
            format!("{:.2}", fa_reduction(m.search.baseline_area, p.fa_estimate)),
            format!("{:.1}", p.netlist_gate_count),
            format!("{gate_red:.2}"),
            format!("{:.2}", p.comparator_width_reduction),
            format!("{:.4}", p.argmax_train_loss),
            m.pareto.contains(&p.id).to_string(),
            (loss <= m.config.report_threshold + 1e-12).to_string(),
            p.chromosome_hash.clone(),
            p.plan_hash.clone(),
            p.design.clone(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// Plain-text overview for the terminal.
pub fn summary_text(m: &Manifest, timings: Option<&Timings>) -> String {
    let mut s = String::new();
    let d = &m.dataset;
    let t = m.topology;
    let _ = writeln!(
        s,
        "{} ({} rows, topology {},{},{}), seed {}",
        d.id, d.rows, t.n_inputs, t.n_hidden, t.n_outputs, m.config.seed
    );
    let _ = writeln!(
        s,
        "float test accuracy {:.4}, quantized {:.4} (drop {:.4})",
        m.float_model.test_accuracy, m.quantized_model.test_accuracy, m.summary.qat_test_drop
    );
    let _ = writeln!(
        s,
        "search: {} evaluations, {} front points, all-keep area {} FA",
        m.search.evaluations, m.search.front_size, m.search.baseline_area
    );
    let _ = writeln!(
        s,
        "FA reduction within {:.0}% train loss: {:.2}x; mean comparator width reduction {:.2}x",
        crate::pipeline::NEAR_LOSSLESS * 100.0,
        m.summary.fa_reduction_near_lossless,
        m.summary.mean_comparator_width_reduction
    );
    let _ = writeln!(s, "pareto set ({}):", m.pareto.len());
    for id in &m.pareto {
        if let Some(p) = m.points.iter().find(|p| &p.id == id) {
            let _ = writeln!(
                s,
                "  {:<6} test {:.4}  gates {:>8.1}  FA {:>5}  {}",
                p.id, p.test_accuracy, p.netlist_gate_count, p.fa_estimate, p.design
            );
        }
    }
    if let Some(t) = timings {
        let _ = writeln!(s, "stage timings:");
        for (stage, secs) in &t.stages {
            let _ = writeln!(s, "  {stage:<9} {secs:>8.2} s");
        }
        let _ = writeln!(s, "  {:<9} {:>8.2} s", "total", t.total());
    }
    s
}
