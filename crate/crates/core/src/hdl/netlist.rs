use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::design::{elaborate, Design, NeuronDesign, TreeDesign};
use crate::adder_tree::{AdderTreeLayout, Chromosome};
use crate::argmax::ArgmaxPlan;
use crate::error::{Error, Result};
use crate::infer::SummandMask;
use crate::mlp::QuantMlp;
use crate::reduce::{self, Compressor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signal {
    Const(bool),
    Net(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellKind {
    /// Inputs `a, b, c`; outputs `sum, carry`.
    Fa,
    /// Inputs `a, b`; outputs `sum, carry`.
    Ha,
    And,
    Or,
    Inv,
    Xor,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cell {
    pub kind: CellKind,
    pub inputs: Vec<u32>,
    pub outputs: Vec<u32>,
}

/// Output port values of one sample, in port order.
pub type Bus = Vec<u64>;

/// A named bus, LSB first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Port {
    pub name: String,
    pub bits: Vec<Signal>,
}

/// Cell counts by kind.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateCount {
    pub fa: u64,
    pub ha: u64,
    pub and: u64,
    pub or: u64,
    pub inv: u64,
    pub xor: u64,
}

impl GateCount {
    pub fn total(&self) -> u64 {
        self.fa + self.ha + self.and + self.or + self.inv + self.xor
    }

    /// Full adder 2, half adder 1, simple gate 0.5.
    pub fn weighted(&self) -> f64 {
        2.0 * self.fa as f64 + self.ha as f64 + 0.5 * (self.and + self.or + self.inv + self.xor) as f64
    }
}

/// Combinational gate-level netlist. Primary input bits are nets; primary
/// outputs may also be constants.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Netlist {
    pub n_nets: u32,
    pub inputs: Vec<Port>,
    pub outputs: Vec<Port>,
    pub cells: Vec<Cell>,
}

impl Netlist {
    pub fn gate_count(&self) -> GateCount {
        let mut g = GateCount::default();
        for c in &self.cells {
            let slot = match c.kind {
                CellKind::Fa => &mut g.fa,
                CellKind::Ha => &mut g.ha,
                CellKind::And => &mut g.and,
                CellKind::Or => &mut g.or,
                CellKind::Inv => &mut g.inv,
                CellKind::Xor => &mut g.xor,
            };
            *slot += 1;
        }
        g
    }

    pub fn input_width(&self) -> usize {
        self.inputs.iter().map(|p| p.bits.len()).sum()
    }

    pub fn output_width(&self) -> usize {
        self.outputs.iter().map(|p| p.bits.len()).sum()
    }

    fn drivers(&self) -> Result<Vec<Option<usize>>> {
        // `Some(usize::MAX)` marks a primary input.
        let mut driver: Vec<Option<usize>> = alloc::vec![None; self.n_nets as usize];
        let mut claim = |net: u32, by: usize| -> Result<()> {
            let slot = driver
                .get_mut(net as usize)
                .ok_or_else(|| Error::MalformedNetlist(alloc::format!("net {net} out of range")))?;
            if slot.is_some() {
                return Err(Error::MalformedNetlist(alloc::format!("net {net} has several drivers")));
            }
            *slot = Some(by);
            Ok(())
        };
        for p in &self.inputs {
            for b in &p.bits {
                match *b {
                    Signal::Net(n) => claim(n, usize::MAX)?,
                    Signal::Const(_) => {
                        return Err(Error::MalformedNetlist(alloc::format!(
                            "input port {} has a constant bit",
                            p.name
                        )))
                    }
                }
            }
        }
        for (i, c) in self.cells.iter().enumerate() {
            let arity = match c.kind {
                CellKind::Fa => (3, 2),
                CellKind::Ha => (2, 2),
                CellKind::Inv => (1, 1),
                _ => (2, 1),
            };
            if (c.inputs.len(), c.outputs.len()) != arity {
                return Err(Error::MalformedNetlist(alloc::format!("cell {i} has the wrong arity")));
            }
            for &o in &c.outputs {
                claim(o, i)?;
            }
        }
        Ok(driver)
    }

    /// Cell evaluation order. Fails on undriven nets, multiple drivers or
    /// combinational loops.
    pub fn topo_order(&self) -> Result<Vec<usize>> {
        let driver = self.drivers()?;
        let n = self.cells.len();
        let mut pending = alloc::vec![0usize; n];
        let mut fanout: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
        for (i, c) in self.cells.iter().enumerate() {
            for &net in &c.inputs {
                match driver.get(net as usize).copied().flatten() {
                    None => {
                        return Err(Error::MalformedNetlist(alloc::format!("net {net} is undriven")));
                    }
                    Some(usize::MAX) => {}
                    Some(d) => {
                        pending[i] += 1;
                        fanout[d].push(i);
                    }
                }
            }
        }
        for p in &self.outputs {
            for b in &p.bits {
                if let Signal::Net(net) = *b {
                    if driver.get(net as usize).copied().flatten().is_none() {
                        return Err(Error::MalformedNetlist(alloc::format!("output net {net} is undriven")));
                    }
                }
            }
        }
        let mut order = Vec::with_capacity(n);
        let mut ready: Vec<usize> = (0..n).rev().filter(|&i| pending[i] == 0).collect();
        while let Some(i) = ready.pop() {
            order.push(i);
            for &j in fanout[i].iter().rev() {
                pending[j] -= 1;
                if pending[j] == 0 {
                    ready.push(j);
                }
            }
        }
        if order.len() != n {
            return Err(Error::MalformedNetlist("combinational loop".into()));
        }
        Ok(order)
    }

    pub fn validate(&self) -> Result<()> {
        self.topo_order().map(|_| ())
    }

    /// Evaluates 64 input vectors at once, one per bit lane. `inputs` holds
    /// one word per primary input bit, ports in order.
    pub fn simulate_words(&self, inputs: &[u64]) -> Result<Vec<u64>> {
        let order = self.topo_order()?;
        self.run(&order, inputs)
    }

    fn run(&self, order: &[usize], inputs: &[u64]) -> Result<Vec<u64>> {
        if inputs.len() != self.input_width() {
            return Err(Error::WidthMismatch {
                expected: self.input_width(),
                got: inputs.len(),
            });
        }
        let mut v = alloc::vec![0u64; self.n_nets as usize];
        let input_nets = self.inputs.iter().flat_map(|p| &p.bits);
        for (s, &w) in input_nets.zip(inputs) {
            if let Signal::Net(n) = *s {
                v[n as usize] = w;
            }
        }
        for &i in order {
            let c = &self.cells[i];
            let x = |k: usize| v[c.inputs[k] as usize];
            match c.kind {
                CellKind::Fa => {
                    let (a, b, d) = (x(0), x(1), x(2));
                    v[c.outputs[0] as usize] = a ^ b ^ d;
                    v[c.outputs[1] as usize] = (a & b) | (d & (a ^ b));
                }
                CellKind::Ha => {
                    let (a, b) = (x(0), x(1));
                    v[c.outputs[0] as usize] = a ^ b;
                    v[c.outputs[1] as usize] = a & b;
                }
                CellKind::And => v[c.outputs[0] as usize] = x(0) & x(1),
                CellKind::Or => v[c.outputs[0] as usize] = x(0) | x(1),
                CellKind::Xor => v[c.outputs[0] as usize] = x(0) ^ x(1),
                CellKind::Inv => v[c.outputs[0] as usize] = !x(0),
            }
        }
        Ok(self
            .outputs
            .iter()
            .flat_map(|p| &p.bits)
            .map(|s| match *s {
                Signal::Const(b) => {
                    if b {
                        u64::MAX
                    } else {
                        0
                    }
                }
                Signal::Net(n) => v[n as usize],
            })
            .collect())
    }

    /// Single-vector simulation.
    pub fn simulate(&self, inputs: &[bool]) -> Result<Vec<bool>> {
        let words: Vec<u64> = inputs.iter().map(|&b| u64::from(b)).collect();
        Ok(self.simulate_words(&words)?.into_iter().map(|w| w & 1 == 1).collect())
    }

    /// Runs integer input vectors (each value `input_bits` wide, packed LSB
    /// first per value) and returns every sample's output ports as integers.
    pub fn run_vectors(&self, xs: &[Vec<u32>], input_bits: u32) -> Result<Vec<Bus>> {
        if let Some(p) = self.outputs.iter().find(|p| p.bits.len() > 64) {
            return Err(Error::WidthMismatch {
                expected: 64,
                got: p.bits.len(),
            });
        }
        let order = self.topo_order()?;
        let mut out = Vec::with_capacity(xs.len());
        for chunk in xs.chunks(64) {
            let n_bits = chunk.first().map_or(0, Vec::len) * input_bits as usize;
            let mut words = alloc::vec![0u64; n_bits];
            for (lane, x) in chunk.iter().enumerate() {
                for (i, &v) in x.iter().enumerate() {
                    for b in 0..input_bits {
                        words[i * input_bits as usize + b as usize] |= u64::from(v >> b & 1) << lane;
                    }
                }
            }
            let res = self.run(&order, &words)?;
            for lane in 0..chunk.len() {
                let mut ports = Vec::with_capacity(self.outputs.len());
                let mut bit = 0;
                for p in &self.outputs {
                    let v = (0..p.bits.len()).fold(0u64, |acc, k| acc | (res[bit + k] >> lane & 1) << k);
                    ports.push(v);
                    bit += p.bits.len();
                }
                out.push(ports);
            }
        }
        Ok(out)
    }

    /// Removes cells that drive nothing observable, narrows adders whose
    /// carry is unused, and renumbers nets densely.
    fn prune(&mut self) {
        let mut used = alloc::vec![false; self.n_nets as usize];
        for p in &self.outputs {
            for s in &p.bits {
                if let Signal::Net(n) = *s {
                    used[n as usize] = true;
                }
            }
        }
        let mut kept = Vec::with_capacity(self.cells.len());
        let cells = core::mem::take(&mut self.cells);
        for c in cells.into_iter().rev() {
            let live: Vec<bool> = c.outputs.iter().map(|&o| used[o as usize]).collect();
            if !live.iter().any(|&l| l) {
                continue;
            }
            for &i in &c.inputs {
                used[i as usize] = true;
            }
            match (c.kind, live.as_slice()) {
                (CellKind::Ha, [true, false]) => kept.push(Cell {
                    kind: CellKind::Xor,
                    inputs: c.inputs,
                    outputs: alloc::vec![c.outputs[0]],
                }),
                (CellKind::Ha, [false, true]) => kept.push(Cell {
                    kind: CellKind::And,
                    inputs: c.inputs,
                    outputs: alloc::vec![c.outputs[1]],
                }),
                (CellKind::Fa, [true, false]) => {
                    let t = self.n_nets;
                    self.n_nets += 1;
                    used.push(true);
                    kept.push(Cell {
                        kind: CellKind::Xor,
                        inputs: alloc::vec![t, c.inputs[2]],
                        outputs: alloc::vec![c.outputs[0]],
                    });
                    kept.push(Cell {
                        kind: CellKind::Xor,
                        inputs: alloc::vec![c.inputs[0], c.inputs[1]],
                        outputs: alloc::vec![t],
                    });
                }
                _ => kept.push(c),
            }
        }
        kept.reverse();
        self.cells = kept;
        self.renumber();
    }

    fn renumber(&mut self) {
        let mut map = alloc::vec![u32::MAX; self.n_nets as usize];
        let mut next = 0u32;
        let mut assign = |n: u32| {
            map[n as usize] = next;
            next += 1;
        };
        for p in &self.inputs {
            for s in &p.bits {
                if let Signal::Net(n) = *s {
                    assign(n);
                }
            }
        }
        for c in &self.cells {
            for &o in &c.outputs {
                assign(o);
            }
        }
        let remap = |n: &mut u32| *n = map[*n as usize];
        for c in &mut self.cells {
            c.inputs.iter_mut().for_each(remap);
            c.outputs.iter_mut().for_each(remap);
        }
        for p in self.inputs.iter_mut().chain(self.outputs.iter_mut()) {
            for s in &mut p.bits {
                if let Signal::Net(n) = s {
                    *n = map[*n as usize];
                }
            }
        }
        self.n_nets = next;
    }
}

/// Netlist under construction, folding constants as gates are requested.
#[derive(Debug, Default)]
pub struct NetlistBuilder {
    n_nets: u32,
    cells: Vec<Cell>,
    inverse: BTreeMap<u32, u32>,
}

impl NetlistBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    /// Fresh net, for use as an input bit.
    pub fn net(&mut self) -> u32 {
        self.n_nets += 1;
        self.n_nets - 1
    }

    fn cell(&mut self, kind: CellKind, inputs: Vec<u32>, n_out: usize) -> Vec<u32> {
        let outputs: Vec<u32> = (0..n_out).map(|_| self.net()).collect();
        self.cells.push(Cell {
            kind,
            inputs,
            outputs: outputs.clone(),
        });
        outputs
    }

    fn gate2(&mut self, kind: CellKind, a: u32, b: u32) -> Signal {
        Signal::Net(self.cell(kind, alloc::vec![a, b], 1)[0])
    }

    pub fn inv(&mut self, a: Signal) -> Signal {
        match a {
            Signal::Const(b) => Signal::Const(!b),
            Signal::Net(n) => {
                if let Some(&m) = self.inverse.get(&n) {
                    return Signal::Net(m);
                }
                let m = self.cell(CellKind::Inv, alloc::vec![n], 1)[0];
                self.inverse.insert(n, m);
                self.inverse.insert(m, n);
                Signal::Net(m)
            }
        }
    }

    pub fn and(&mut self, a: Signal, b: Signal) -> Signal {
        match (a, b) {
            (Signal::Const(false), _) | (_, Signal::Const(false)) => Signal::Const(false),
            (Signal::Const(true), x) | (x, Signal::Const(true)) => x,
            (Signal::Net(x), Signal::Net(y)) if x == y => a,
            (Signal::Net(x), Signal::Net(y)) if self.inverse.get(&x) == Some(&y) => Signal::Const(false),
            (Signal::Net(x), Signal::Net(y)) => self.gate2(CellKind::And, x, y),
        }
    }

    pub fn or(&mut self, a: Signal, b: Signal) -> Signal {
        match (a, b) {
            (Signal::Const(true), _) | (_, Signal::Const(true)) => Signal::Const(true),
            (Signal::Const(false), x) | (x, Signal::Const(false)) => x,
            (Signal::Net(x), Signal::Net(y)) if x == y => a,
            (Signal::Net(x), Signal::Net(y)) if self.inverse.get(&x) == Some(&y) => Signal::Const(true),
            (Signal::Net(x), Signal::Net(y)) => self.gate2(CellKind::Or, x, y),
        }
    }

    pub fn xor(&mut self, a: Signal, b: Signal) -> Signal {
        match (a, b) {
            (Signal::Const(false), x) | (x, Signal::Const(false)) => x,
            (Signal::Const(true), x) | (x, Signal::Const(true)) => self.inv(x),
            (Signal::Net(x), Signal::Net(y)) if x == y => Signal::Const(false),
            (Signal::Net(x), Signal::Net(y)) if self.inverse.get(&x) == Some(&y) => Signal::Const(true),
            (Signal::Net(x), Signal::Net(y)) => self.gate2(CellKind::Xor, x, y),
        }
    }

    /// `s ? a : b`
    pub fn mux(&mut self, s: Signal, a: Signal, b: Signal) -> Signal {
        match (s, a, b) {
            (Signal::Const(true), a, _) => a,
            (Signal::Const(false), _, b) => b,
            (_, a, b) if a == b => a,
            (s, Signal::Const(true), Signal::Const(false)) => s,
            (s, Signal::Const(false), Signal::Const(true)) => self.inv(s),
            (s, a, b) => {
                let ns = self.inv(s);
                let x = self.and(s, a);
                let y = self.and(ns, b);
                self.or(x, y)
            }
        }
    }

    /// Ripple sum of two equal-width operands plus a carry-in, modulo
    /// `2^width`. Also returns the carry out.
    pub fn add(&mut self, a: &[Signal], b: &[Signal], carry_in: Signal) -> (Vec<Signal>, Signal) {
        let mut carry = carry_in;
        let mut out = Vec::with_capacity(a.len());
        for (&x, &y) in a.iter().zip(b) {
            let (s, c) = self.full_add(x, y, carry);
            out.push(s);
            carry = c;
        }
        (out, carry)
    }
}

impl NetlistBuilder {
    /// Closes the netlist over the given ports and drops unobservable cells.
    pub fn finish(self, inputs: Vec<Port>, outputs: Vec<Port>) -> Netlist {
        let mut n = Netlist {
            n_nets: self.n_nets,
            inputs,
            outputs,
            cells: self.cells,
        };
        n.prune();
        n
    }
}

impl Compressor for NetlistBuilder {
    type Bit = Signal;

    fn full_add(&mut self, a: Signal, b: Signal, c: Signal) -> (Signal, Signal) {
        let mut v = [a, b, c];
        v.sort_unstable();
        match v {
            [Signal::Const(false), x, y] => self.half_add(x, y),
            [Signal::Const(true), x, y] => {
                let t = self.xor(x, y);
                let s = self.inv(t);
                let cy = self.or(x, y);
                (s, cy)
            }
            [Signal::Net(x), Signal::Net(y), Signal::Net(z)] => {
                // x + x + c = 2x + c; x + ~x + c = 1 + c.
                for (p, q, r) in [(x, y, z), (x, z, y), (y, z, x)] {
                    if p == q {
                        return (Signal::Net(r), Signal::Net(p));
                    }
                    if self.inverse.get(&p) == Some(&q) {
                        let s = self.inv(Signal::Net(r));
                        return (s, Signal::Net(r));
                    }
                }
                let o = self.cell(CellKind::Fa, alloc::vec![x, y, z], 2);
                (Signal::Net(o[0]), Signal::Net(o[1]))
            }
            _ => unreachable!("constants sort first"),
        }
    }

    fn half_add(&mut self, a: Signal, b: Signal) -> (Signal, Signal) {
        match (a, b) {
            (Signal::Const(false), x) | (x, Signal::Const(false)) => (x, Signal::Const(false)),
            (Signal::Const(true), x) | (x, Signal::Const(true)) => (self.inv(x), x),
            (Signal::Net(x), Signal::Net(y)) if x == y => (Signal::Const(false), a),
            (Signal::Net(x), Signal::Net(y)) if self.inverse.get(&x) == Some(&y) => {
                (Signal::Const(true), Signal::Const(false))
            }
            (Signal::Net(x), Signal::Net(y)) => {
                let o = self.cell(CellKind::Ha, alloc::vec![x, y], 2);
                (Signal::Net(o[0]), Signal::Net(o[1]))
            }
        }
    }

    fn zero(&mut self) -> Signal {
        Signal::Const(false)
    }
}

fn tree_sum(b: &mut NetlistBuilder, t: &TreeDesign, inputs: &[Vec<Signal>]) -> Vec<Signal> {
    let width = t.width as usize;
    let mut cols: Vec<Vec<Signal>> = alloc::vec![Vec::new(); width];
    for s in &t.summands {
        for bit in 0..s.src_bits {
            if s.kept >> bit & 1 == 1 {
                let k = (s.shift + bit) as usize;
                let sig = inputs[s.input][bit as usize];
                if sig != Signal::Const(false) {
                    cols[k].push(sig);
                }
            }
        }
    }
    for (k, col) in cols.iter_mut().enumerate() {
        if t.constant >> k & 1 == 1 {
            col.push(Signal::Const(true));
        }
    }
    reduce::reduce_columns(b, &mut cols);
    reduce::ripple(b, &cols, width, None)
}

/// `pos - neg` in the neuron's two's-complement width.
fn neuron_acc(b: &mut NetlistBuilder, n: &NeuronDesign, inputs: &[Vec<Signal>]) -> Vec<Signal> {
    let w = n.width as usize;
    let extend = |mut v: Vec<Signal>| {
        v.resize(w, Signal::Const(false));
        v.truncate(w);
        v
    };
    let pos = extend(tree_sum(b, &n.pos, inputs));
    let neg = extend(tree_sum(b, &n.neg, inputs));
    let neg_inv: Vec<Signal> = neg.into_iter().map(|s| b.inv(s)).collect();
    b.add(&pos, &neg_inv, Signal::Const(true)).0
}

fn qrelu(b: &mut NetlistBuilder, acc: &[Signal], frac_bits: u32, truncate: u32, out_bits: u32) -> Vec<Signal> {
    let w = acc.len();
    let sign = acc[w - 1];
    let lo = (frac_bits + truncate) as usize;
    let hi = lo + out_bits as usize;
    let mut overflow = Signal::Const(false);
    for &s in acc.iter().take(w - 1).skip(hi) {
        overflow = b.or(overflow, s);
    }
    let keep = b.inv(sign);
    (lo..hi)
        .map(|k| {
            let bit = if k < w - 1 { acc[k] } else { Signal::Const(false) };
            let clipped = b.or(bit, overflow);
            b.and(clipped, keep)
        })
        .collect()
}

/// Comparator bracket; returns the winning index bits.
fn bracket(b: &mut NetlistBuilder, plan: &ArgmaxPlan, values: Vec<Vec<Signal>>, class_bits: u32) -> Vec<Signal> {
    let w = plan.width as usize;
    let mut slots: Vec<(Vec<Signal>, Vec<Signal>)> = values
        .into_iter()
        .enumerate()
        .map(|(i, v)| {
            let idx = (0..class_bits).map(|k| Signal::Const(i >> k & 1 == 1)).collect();
            (v, idx)
        })
        .collect();
    for stage in &plan.stages {
        let mut used = alloc::vec![false; slots.len()];
        let mut next = Vec::with_capacity(slots.len().div_ceil(2));
        for c in stage {
            used[c.a] = true;
            used[c.b] = true;
            let keep = plan.mask(c).bits();
            let (va, ia) = &slots[c.a];
            let (vb, ib) = &slots[c.b];
            // Keys: masked value (sign flipped when kept, making the
            // comparison unsigned) above the inverted index.
            let key = |b: &mut NetlistBuilder, v: &[Signal], idx: &[Signal]| -> Vec<Signal> {
                let mut k: Vec<Signal> = idx.iter().map(|&s| b.inv(s)).collect();
                for (bit, &s) in v.iter().enumerate() {
                    let m = if keep >> bit & 1 == 1 { s } else { Signal::Const(false) };
                    k.push(if bit == w - 1 && keep >> bit & 1 == 1 {
                        b.inv(m)
                    } else {
                        m
                    });
                }
                k
            };
            let ka = key(b, va, ia);
            let kb = key(b, vb, ib);
            let kb_inv: Vec<Signal> = kb.into_iter().map(|s| b.inv(s)).collect();
            let (_, a_wins) = b.add(&ka, &kb_inv, Signal::Const(true));
            let (va, ia, vb, ib) = (va.clone(), ia.clone(), vb.clone(), ib.clone());
            let v = va.iter().zip(&vb).map(|(&x, &y)| b.mux(a_wins, x, y)).collect();
            let i = ia.iter().zip(&ib).map(|(&x, &y)| b.mux(a_wins, x, y)).collect();
            next.push((v, i));
        }
        for (s, u) in slots.into_iter().zip(used) {
            if !u {
                next.push(s);
            }
        }
        slots = next;
    }
    slots.swap_remove(0).1
}

impl Netlist {
    /// Gate-level realization of an elaborated design: carry-save trees,
    /// ripple adders, subtractors, QRelu gating and the comparator bracket.
    pub fn from_design(d: &Design) -> Netlist {
        let mut b = NetlistBuilder::new();
        let x_bits: Vec<u32> = (0..d.n_inputs * d.input_bits as usize).map(|_| b.net()).collect();
        let x: Vec<Vec<Signal>> = x_bits
            .chunks(d.input_bits as usize)
            .map(|c| c.iter().map(|&n| Signal::Net(n)).collect())
            .collect();
        let h: Vec<Vec<Signal>> = d
            .hidden
            .iter()
            .map(|n| {
                let acc = neuron_acc(&mut b, n, &x);
                qrelu(
                    &mut b,
                    &acc,
                    d.hidden_frac_bits,
                    n.truncate_lsb.unwrap_or(0),
                    d.qrelu_bits,
                )
            })
            .collect();
        let wo = d.output_width as usize;
        let values: Vec<Vec<Signal>> = d
            .output
            .iter()
            .map(|n| {
                let mut acc = neuron_acc(&mut b, n, &h);
                let sign = *acc.last().expect("width is positive");
                acc.resize(wo, sign);
                acc
            })
            .collect();
        let outputs = match &d.argmax {
            Some(a) => alloc::vec![Port {
                name: "class_idx".into(),
                bits: bracket(&mut b, &a.plan, values, a.class_bits),
            }],
            None => values
                .into_iter()
                .enumerate()
                .map(|(k, bits)| Port {
                    name: alloc::format!("y{k}"),
                    bits,
                })
                .collect(),
        };
        let inputs = alloc::vec![Port {
            name: "x".into(),
            bits: x_bits.into_iter().map(Signal::Net).collect(),
        }];
        b.finish(inputs, outputs)
    }
}

/// Netlist of `m` with the summand bits removed by `c` and the given
/// bracket (or raw outputs without one).
pub fn build_netlist(
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    c: &Chromosome,
    plan: Option<&ArgmaxPlan>,
) -> Result<Netlist> {
    let mask = SummandMask::from_chromosome(m, layout, c)?;
    Ok(Netlist::from_design(&elaborate(m, &mask, plan)?))
}
