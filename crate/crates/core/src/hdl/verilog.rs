use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use serde::{Deserialize, Serialize};

use super::design::{elaborate, Design, NeuronDesign, Summand, TreeDesign};
use crate::adder_tree::{AdderTreeLayout, Chromosome};
use crate::argmax::ArgmaxPlan;
use crate::error::{Error, Result};
use crate::infer::SummandMask;
use crate::mlp::QuantMlp;

/// Values recorded in the header comment of an emitted module.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub model_hash: u64,
    pub chromosome_hash: u64,
    pub plan_hash: u64,
    pub train_accuracy: Option<f64>,
    pub fa_estimate: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmitConfig {
    pub module_name: String,
    /// Emit the comparator bracket and a class-index output; otherwise
    /// expose the raw output-neuron values.
    pub include_argmax: bool,
    pub provenance: Provenance,
}

impl Default for EmitConfig {
    fn default() -> Self {
        EmitConfig {
            module_name: "bespoke_mlp".into(),
            include_argmax: true,
            provenance: Provenance::default(),
        }
    }
}

const KEYWORDS: &[&str] = &[
    "always",
    "and",
    "assign",
    "begin",
    "buf",
    "case",
    "default",
    "else",
    "end",
    "endcase",
    "endfunction",
    "endmodule",
    "for",
    "function",
    "if",
    "initial",
    "inout",
    "input",
    "integer",
    "module",
    "nand",
    "nor",
    "not",
    "or",
    "output",
    "parameter",
    "reg",
    "signed",
    "wire",
    "xor",
];

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    let head_ok = chars.next().is_some_and(|c| c.is_ascii_alphabetic() || c == '_');
    head_ok && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$') && !KEYWORDS.contains(&s)
}

fn zeros(n: u32) -> String {
    alloc::format!("{{{n}{{1'b0}}}}")
}

/// Wiring of one shifted operand; dropped bits become constant zeros.
pub fn summand_expr(src: &str, s: &Summand) -> String {
    let full = (1u32 << s.src_bits) - 1;
    let mut parts: Vec<String> = Vec::new();
    if s.kept & full == full {
        parts.push(src.to_string());
    } else {
        for b in (0..s.src_bits).rev() {
            parts.push(if s.kept >> b & 1 == 1 {
                alloc::format!("{src}[{b}]")
            } else {
                "1'b0".into()
            });
        }
    }
    if s.shift > 0 {
        parts.push(zeros(s.shift));
    }
    if parts.len() == 1 {
        parts.pop().unwrap()
    } else {
        alloc::format!("{{{}}}", parts.join(", "))
    }
}

struct Writer {
    out: String,
}

impl Writer {
    fn line(&mut self, s: &str) {
        self.out.push_str("    ");
        self.out.push_str(s);
        self.out.push('\n');
    }

    fn wire(&mut self, width: u32, name: &str, expr: &str) {
        let decl = if width == 1 {
            alloc::format!("wire {name} = {expr};")
        } else {
            alloc::format!("wire [{}:0] {name} = {expr};", width - 1)
        };
        self.line(&decl);
    }

    fn tree(&mut self, name: &str, t: &TreeDesign, src: &dyn Fn(usize) -> String) {
        let mut terms: Vec<String> = t.summands.iter().map(|s| summand_expr(&src(s.input), s)).collect();
        if t.constant != 0 || terms.is_empty() {
            terms.push(alloc::format!("{}'d{}", t.width, t.constant));
        }
        self.wire(t.width, name, &terms.join(" + "));
    }

    fn neuron(&mut self, prefix: &str, n: &NeuronDesign, src: &dyn Fn(usize) -> String) {
        self.tree(&alloc::format!("{prefix}_pos"), &n.pos, src);
        self.tree(&alloc::format!("{prefix}_neg"), &n.neg, src);
        self.wire(
            n.width,
            &alloc::format!("{prefix}_acc"),
            &alloc::format!("{prefix}_pos - {prefix}_neg"),
        );
    }

    fn qrelu(&mut self, name: &str, n: &NeuronDesign, frac_bits: u32, out_bits: u32) {
        let w = n.width;
        let lo = frac_bits + n.truncate_lsb.unwrap_or(0);
        let hi = lo + out_bits;
        let acc = alloc::format!("{name}_acc");
        let bits: Vec<String> = (lo..hi)
            .rev()
            .map(|k| {
                if k < w - 1 {
                    alloc::format!("{acc}[{k}]")
                } else {
                    "1'b0".into()
                }
            })
            .collect();
        let kept = alloc::format!("{{{}}}", bits.join(", "));
        let body = if hi < w - 1 {
            let ovf = alloc::format!("{name}_ovf");
            self.wire(1, &ovf, &alloc::format!("|{acc}[{}:{hi}]", w - 2));
            alloc::format!("({ovf} ? {{{out_bits}{{1'b1}}}} : {kept})")
        } else {
            kept
        };
        self.wire(
            out_bits,
            name,
            &alloc::format!("{acc}[{}] ? {} : {body}", w - 1, zeros(out_bits)),
        );
    }
}

/// Verilog-2001 text of an elaborated design: one flat combinational
/// module, multiplier-free.
pub fn emit_design(d: &Design, cfg: &EmitConfig) -> Result<String> {
    if !is_identifier(&cfg.module_name) {
        return Err(Error::InvalidIdentifier(cfg.module_name.clone()));
    }
    let b = d.input_bits;
    let wo = d.output_width;
    let p = &cfg.provenance;
    let mut head = String::new();
    let _ = writeln!(
        head,
        "// Bespoke MLP ({},{},{}), {b}-bit inputs, {}-bit QRelu.",
        d.n_inputs,
        d.hidden.len(),
        d.output.len(),
        d.qrelu_bits
    );
    let _ = writeln!(
        head,
        "// model {:016x} chromosome {:016x} plan {:016x}",
        p.model_hash, p.chromosome_hash, p.plan_hash
    );
    if let Some(a) = p.train_accuracy {
        let _ = writeln!(head, "// train accuracy {a:.6}");
    }
    if let Some(fa) = p.fa_estimate {
        let _ = writeln!(head, "// estimated full adders {fa}");
    }
    let _ = writeln!(head, "module {} (", cfg.module_name);
    let _ = write!(head, "    input wire [{}:0] x", d.n_inputs as u32 * b - 1);
    let argmax = d.argmax.as_ref().filter(|_| cfg.include_argmax);
    match argmax {
        Some(a) => {
            let _ = write!(head, ",\n    output wire [{}:0] class_idx", a.class_bits - 1);
        }
        None => {
            for k in 0..d.output.len() {
                let _ = write!(head, ",\n    output wire [{}:0] y{k}", wo - 1);
            }
        }
    }
    head.push_str("\n);\n");

    let mut w = Writer { out: head };
    for i in 0..d.n_inputs as u32 {
        w.wire(
            b,
            &alloc::format!("x{i}"),
            &alloc::format!("x[{}:{}]", i * b + b - 1, i * b),
        );
    }
    for (j, n) in d.hidden.iter().enumerate() {
        w.line(&alloc::format!("// hidden neuron {j}"));
        w.neuron(&alloc::format!("h{j}"), n, &|i| alloc::format!("x{i}"));
        w.qrelu(&alloc::format!("h{j}"), n, d.hidden_frac_bits, d.qrelu_bits);
    }
    for (k, n) in d.output.iter().enumerate() {
        w.line(&alloc::format!("// output neuron {k}"));
        w.neuron(&alloc::format!("o{k}"), n, &|i| alloc::format!("h{i}"));
        let acc = alloc::format!("o{k}_acc");
        let ext = if n.width < wo {
            alloc::format!("{{{{{}{{{acc}[{}]}}}}, {acc}}}", wo - n.width, n.width - 1)
        } else {
            acc
        };
        w.wire(wo, &alloc::format!("o{k}"), &ext);
    }
    match argmax {
        Some(a) => emit_bracket(&mut w, &a.plan, a.class_bits, wo),
        None => {
            for k in 0..d.output.len() {
                w.line(&alloc::format!("assign y{k} = o{k};"));
            }
        }
    }
    w.out.push_str("endmodule\n");
    Ok(w.out)
}

fn emit_bracket(w: &mut Writer, plan: &ArgmaxPlan, class_bits: u32, wo: u32) {
    w.line("// argmax bracket");
    let mut n = plan.n_outputs;
    for k in 0..n {
        w.wire(wo, &alloc::format!("v0_{k}"), &alloc::format!("o{k}"));
        w.wire(
            class_bits,
            &alloc::format!("i0_{k}"),
            &alloc::format!("{class_bits}'d{k}"),
        );
    }
    for (s, stage) in plan.stages.iter().enumerate() {
        let t = s + 1;
        let mut used = alloc::vec![false; n];
        for (c, cmp) in stage.iter().enumerate() {
            used[cmp.a] = true;
            used[cmp.b] = true;
            let keep = plan.mask(cmp).bits();
            let name = alloc::format!("c{s}_{c}");
            for (side, slot) in [("a", cmp.a), ("b", cmp.b)] {
                let bits: Vec<String> = (0..wo)
                    .rev()
                    .map(|k| {
                        if keep >> k & 1 == 1 {
                            alloc::format!("v{s}_{slot}[{k}]")
                        } else {
                            "1'b0".into()
                        }
                    })
                    .collect();
                w.wire(
                    wo,
                    &alloc::format!("{name}_{side}"),
                    &alloc::format!("{{{}}}", bits.join(", ")),
                );
            }
            let gt = if keep >> (wo - 1) & 1 == 1 {
                alloc::format!("$signed({name}_a) > $signed({name}_b)")
            } else {
                alloc::format!("{name}_a > {name}_b")
            };
            w.wire(
                1,
                &alloc::format!("{name}_win"),
                &alloc::format!("({gt}) | (({name}_a == {name}_b) & (i{s}_{} < i{s}_{}))", cmp.a, cmp.b),
            );
            w.wire(
                wo,
                &alloc::format!("v{t}_{c}"),
                &alloc::format!("{name}_win ? v{s}_{} : v{s}_{}", cmp.a, cmp.b),
            );
            w.wire(
                class_bits,
                &alloc::format!("i{t}_{c}"),
                &alloc::format!("{name}_win ? i{s}_{} : i{s}_{}", cmp.a, cmp.b),
            );
        }
        if let Some(p) = used.iter().position(|&u| !u) {
            let c = stage.len();
            w.wire(wo, &alloc::format!("v{t}_{c}"), &alloc::format!("v{s}_{p}"));
            w.wire(class_bits, &alloc::format!("i{t}_{c}"), &alloc::format!("i{s}_{p}"));
        }
        n = n.div_ceil(2);
    }
    w.line(&alloc::format!("assign class_idx = i{}_0;", plan.stages.len()));
}

/// Verilog for `m` with the summand bits removed by `c`, ending in `plan`
/// when `cfg.include_argmax` is set.
pub fn emit_verilog(
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    c: &Chromosome,
    plan: &ArgmaxPlan,
    cfg: &EmitConfig,
) -> Result<String> {
    let mask = SummandMask::from_chromosome(m, layout, c)?;
    let d = elaborate(m, &mask, cfg.include_argmax.then_some(plan))?;
    emit_design(&d, cfg)
}
