//! Approximate output-layer argmax: a single-elimination comparator bracket
//! in which every comparator looks at a reduced subset of bits.
//!
//! Each stage pairs the surviving candidates. For every candidate pair a
//! greedy MSB-first pass drops comparator bits while train accuracy stays
//! within the guard, and the Hungarian algorithm picks the pairing with the
//! fewest kept bits in total. Winners advance in comparator order; an odd
//! candidate passes through as the last slot.
//!
//! Values are `width`-bit two's-complement integers. A comparator zeroes the
//! bits it does not keep in both operands and compares what is left, signed
//! if the sign bit is kept and unsigned otherwise. Equal masked values go to
//! the lower neuron index, so a full-width bracket is exactly the argmax.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::QuantizedDataset;
use crate::error::{Error, Result};
use crate::infer::{output_width, Evaluator, SummandMask};
use crate::mlp::QuantMlp;

/// Largest train-accuracy loss a single comparator may introduce.
pub const DEFAULT_GUARD: f64 = 0.005;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ComparatorMask {
    pub width: u32,
    /// Ascending bit positions, each below `width`.
    pub kept_bits: Vec<u32>,
}

impl ComparatorMask {
    pub fn full(width: u32) -> Self {
        ComparatorMask {
            width,
            kept_bits: (0..width).collect(),
        }
    }

    pub fn from_bits(width: u32, bits: u64) -> Self {
        ComparatorMask {
            width,
            kept_bits: (0..width).filter(|&b| bits >> b & 1 == 1).collect(),
        }
    }

    pub fn bits(&self) -> u64 {
        self.kept_bits.iter().fold(0, |m, &b| m | 1 << b)
    }

    pub fn kept(&self) -> u32 {
        self.kept_bits.len() as u32
    }

    fn compile(&self) -> Masker {
        Masker::new(self.width, self.bits())
    }
}

#[derive(Debug, Clone, Copy)]
struct Masker {
    bits: u64,
    sign: u64,
}

impl Masker {
    fn new(width: u32, bits: u64) -> Self {
        let sign = 1u64 << (width - 1);
        Masker {
            bits: bits & low_bits(width),
            sign: if bits & sign != 0 { sign } else { 0 },
        }
    }

    #[inline]
    fn apply(self, v: i64) -> i64 {
        let u = v as u64 & self.bits;
        if u & self.sign != 0 {
            u as i64 - 2 * self.sign as i64
        } else {
            u as i64
        }
    }

    /// Winning neuron of `a` against `b` on row `v`.
    #[inline]
    fn winner(self, v: &[i64], a: usize, b: usize) -> usize {
        let (x, y) = (self.apply(v[a]), self.apply(v[b]));
        if x > y || (x == y && a < b) {
            a
        } else {
            b
        }
    }
}

fn low_bits(width: u32) -> u64 {
    if width >= 64 {
        u64::MAX
    } else {
        (1u64 << width) - 1
    }
}

/// Exact comparison: larger value, then lower index.
#[inline]
fn better(v: &[i64], a: usize, b: usize) -> usize {
    if v[a] > v[b] || (v[a] == v[b] && a < b) {
        a
    } else {
        b
    }
}

/// A comparator between two candidate slots of a stage.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Comparator {
    pub a: usize,
    pub b: usize,
    pub kept_bits: Vec<u32>,
}

/// Comparator bracket. Stage 0 slots are the output neurons; the slots of
/// the next stage are the winners in comparator order followed by the
/// candidate no comparator touched, if any.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ArgmaxPlan {
    pub n_outputs: usize,
    pub width: u32,
    pub stages: Vec<Vec<Comparator>>,
}

impl ArgmaxPlan {
    /// Plain balanced bracket over the neurons in index order with every
    /// bit kept.
    pub fn full_width(n_outputs: usize, width: u32) -> Self {
        let mut stages = Vec::new();
        let mut n = n_outputs;
        while n > 1 {
            stages.push(
                (0..n / 2)
                    .map(|k| Comparator {
                        a: 2 * k,
                        b: 2 * k + 1,
                        kept_bits: (0..width).collect(),
                    })
                    .collect(),
            );
            n = n.div_ceil(2);
        }
        ArgmaxPlan {
            n_outputs,
            width,
            stages,
        }
    }

    pub fn comparators(&self) -> impl Iterator<Item = &Comparator> {
        self.stages.iter().flatten()
    }

    pub fn n_comparators(&self) -> usize {
        self.stages.iter().map(Vec::len).sum()
    }

    /// Total bits compared over all comparators.
    pub fn kept_bits(&self) -> u64 {
        self.comparators().map(|c| c.kept_bits.len() as u64).sum()
    }

    /// Full comparator width divided by kept width, summed over the bracket.
    pub fn width_reduction(&self) -> f64 {
        let full = self.n_comparators() as u64 * u64::from(self.width);
        if full == 0 {
            return 1.0;
        }
        full as f64 / self.kept_bits().max(1) as f64
    }

    pub fn mask(&self, c: &Comparator) -> ComparatorMask {
        ComparatorMask {
            width: self.width,
            kept_bits: c.kept_bits.clone(),
        }
    }

    /// Checks that every stage is a valid round of a single-elimination
    /// bracket ending in one candidate.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::ShapeMismatch(alloc::format!("argmax plan: {m}")));
        if self.width == 0 || self.width > 63 {
            return bad("width must be in 1..=63");
        }
        let mut n = self.n_outputs;
        for stage in &self.stages {
            let mut used = alloc::vec![false; n];
            for c in stage {
                if c.a >= n || c.b >= n || c.a == c.b || used[c.a] || used[c.b] {
                    return bad("comparator slots must be distinct and in range");
                }
                used[c.a] = true;
                used[c.b] = true;
                if c.kept_bits.iter().any(|&b| b >= self.width) {
                    return bad("kept bit outside width");
                }
            }
            if used.iter().filter(|&&u| !u).count() > 1 {
                return bad("more than one pass-through candidate");
            }
            n = n.div_ceil(2);
        }
        if n != 1 {
            return bad("bracket does not end in a single candidate");
        }
        Ok(())
    }

    fn compiled(&self) -> Vec<Vec<(usize, usize, Masker)>> {
        self.stages
            .iter()
            .map(|s| s.iter().map(|c| (c.a, c.b, self.mask(c).compile())).collect())
            .collect()
    }

    /// Winning neuron for one vector of output values.
    pub fn select(&self, values: &[i64]) -> usize {
        let mut slots: Vec<usize> = (0..self.n_outputs).collect();
        for stage in self.compiled() {
            slots = advance(&slots, &stage, values);
        }
        slots[0]
    }
}

fn advance(slots: &[usize], stage: &[(usize, usize, Masker)], v: &[i64]) -> Vec<usize> {
    let mut used = alloc::vec![false; slots.len()];
    let mut next = Vec::with_capacity(slots.len().div_ceil(2));
    for &(a, b, m) in stage {
        used[a] = true;
        used[b] = true;
        next.push(m.winner(v, slots[a], slots[b]));
    }
    next.extend(slots.iter().zip(&used).filter(|(_, &u)| !u).map(|(&s, _)| s));
    next
}

/// Pairwise kept-bit costs; `None` is an infinite (forbidden) entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostMatrix {
    pub entries: Vec<Vec<Option<u32>>>,
}

impl CostMatrix {
    pub fn side(&self) -> usize {
        self.entries.len()
    }

    pub fn pairing_cost(&self, pairs: &[(usize, usize)]) -> Option<u64> {
        pairs.iter().map(|&(i, j)| self.entries[i][j].map(u64::from)).sum()
    }
}

const INF: i64 = 1 << 40;

/// Minimum-cost assignment (Kuhn–Munkres with potentials). Returns the
/// column assigned to every row.
pub fn kuhn_munkres(cost: &[Vec<i64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays; index 0 is the virtual root.
    let mut u = alloc::vec![0i64; n + 1];
    let mut v = alloc::vec![0i64; n + 1];
    let mut p = alloc::vec![0usize; n + 1];
    let mut way = alloc::vec![0usize; n + 1];
    for i in 1..=n {
        p[0] = i;
        let mut j0 = 0;
        let mut minv = alloc::vec![i64::MAX; n + 1];
        let mut used = alloc::vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = p[j0];
            let mut delta = i64::MAX;
            let mut j1 = 0;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < minv[j] {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if p[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = alloc::vec![0; n];
    for j in 1..=n {
        assign[p[j] - 1] = j - 1;
    }
    assign
}

/// Exact minimum-cost perfect pairing by dynamic programming over subsets.
/// Ties resolve to the lexicographically first choice.
fn min_pairing(cost: &[Vec<i64>]) -> Vec<(usize, usize)> {
    let n = cost.len();
    let full = (1usize << n) - 1;
    let mut best = alloc::vec![INF * 4; 1 << n];
    let mut choice = alloc::vec![0usize; 1 << n];
    best[full] = 0;
    for s in (0..full).rev() {
        let i = (!s).trailing_zeros() as usize;
        for j in i + 1..n {
            if s >> j & 1 == 1 {
                continue;
            }
            let t = s | 1 << i | 1 << j;
            let c = cost[i][j].saturating_add(best[t]);
            if c < best[s] {
                best[s] = c;
                choice[s] = j;
            }
        }
    }
    let mut pairs = Vec::new();
    let mut s = 0usize;
    while s != full {
        let i = (!s).trailing_zeros() as usize;
        let j = choice[s];
        pairs.push((i, j));
        s |= 1 << i | 1 << j;
    }
    pairs
}

/// Pairs the candidates so each appears once and the total cost is minimal.
/// An odd candidate count leaves the unpaired one out.
///
/// The assignment relaxation is solved with the Hungarian algorithm; when
/// its optimum is a set of 2-cycles it is also an optimal pairing. Otherwise
/// an exact subset search settles the pairing.
pub fn hungarian_assign(c: &CostMatrix) -> Result<Vec<(usize, usize)>> {
    let n = c.side();
    if c.entries.iter().any(|r| r.len() != n) {
        return Err(Error::ShapeMismatch("cost matrix must be square".into()));
    }
    if n < 2 {
        return Ok(Vec::new());
    }
    let m = n + n % 2;
    let mut cost = alloc::vec![alloc::vec![INF; m]; m];
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            cost[i][j] = if i >= n || j >= n {
                0
            } else {
                c.entries[i][j].map_or(INF, i64::from)
            };
        }
    }
    let assign = kuhn_munkres(&cost);
    let involution = (0..m).all(|i| assign[i] != i && assign[assign[i]] == i);
    let pairs: Vec<(usize, usize)> = if involution {
        (0..m).filter(|&i| i < assign[i]).map(|i| (i, assign[i])).collect()
    } else {
        min_pairing(&cost)
    };
    if pairs.iter().any(|&(i, j)| cost[i][j] >= INF) {
        return Err(Error::NoFeasibleAssignment);
    }
    Ok(pairs.into_iter().filter(|&(_, j)| j < n).collect())
}

/// Accuracy is within `guard` of `reference`.
pub fn within_guard(accuracy: f64, reference: f64, guard: f64) -> bool {
    accuracy >= reference - guard - 1e-12
}

/// Train-set output values and labels a plan is fitted on.
#[derive(Debug, Clone)]
pub struct PlanData<'a> {
    pub values: &'a [Vec<i64>],
    pub labels: &'a [usize],
    pub width: u32,
    pub guard: f64,
}

/// Stage under construction: the neuron in every slot of every sample, and
/// the comparators fixed so far.
struct Stage<'d, 'a> {
    data: &'d PlanData<'a>,
    slots: Vec<Vec<usize>>,
    fixed: Vec<(usize, usize, Masker)>,
}

impl Stage<'_, '_> {
    fn n_slots(&self) -> usize {
        self.slots.first().map_or(0, Vec::len)
    }

    /// Best neuron per sample among everything except slots `i` and `j`,
    /// with fixed comparators applied and the rest compared exactly.
    fn rest(&self, i: usize, j: usize) -> Vec<Option<usize>> {
        let n = self.n_slots();
        self.slots
            .iter()
            .zip(self.data.values)
            .map(|(slots, v)| {
                let mut used = alloc::vec![false; n];
                used[i] = true;
                used[j] = true;
                let mut best: Option<usize> = None;
                let mut take = |c: usize| best = Some(best.map_or(c, |b| better(v, b, c)));
                for &(a, b, m) in &self.fixed {
                    used[a] = true;
                    used[b] = true;
                    take(m.winner(v, slots[a], slots[b]));
                }
                for (s, &u) in used.iter().enumerate() {
                    if !u {
                        take(slots[s]);
                    }
                }
                best
            })
            .collect()
    }

    fn hits(&self, i: usize, j: usize, m: Masker, rest: &[Option<usize>]) -> usize {
        self.slots
            .iter()
            .zip(self.data.values)
            .zip(self.data.labels)
            .zip(rest)
            .filter(|(((slots, v), &y), r)| {
                let w = m.winner(v, slots[i], slots[j]);
                r.map_or(w, |r| better(v, w, r)) == y
            })
            .count()
    }

    /// Drops bits MSB first while accuracy stays within the guard of the
    /// full-width comparator.
    fn greedy(&self, i: usize, j: usize) -> ComparatorMask {
        let w = self.data.width;
        let rest = self.rest(i, j);
        let n = self.data.labels.len().max(1) as f64;
        let reference = self.hits(i, j, Masker::new(w, low_bits(w)), &rest) as f64 / n;
        let mut bits = low_bits(w);
        for b in (0..w).rev() {
            let trial = bits & !(1 << b);
            let acc = self.hits(i, j, Masker::new(w, trial), &rest) as f64 / n;
            if within_guard(acc, reference, self.data.guard) {
                bits = trial;
            }
        }
        ComparatorMask::from_bits(w, bits)
    }

    fn accuracy_with(&self, i: usize, j: usize, m: &ComparatorMask) -> f64 {
        let rest = self.rest(i, j);
        self.hits(i, j, m.compile(), &rest) as f64 / self.data.labels.len().max(1) as f64
    }

    /// Accuracy with the fixed comparators and exact argmax elsewhere.
    fn running(&self) -> f64 {
        let hits = self
            .slots
            .iter()
            .zip(self.data.values)
            .zip(self.data.labels)
            .filter(|((slots, v), &y)| {
                let mut used = alloc::vec![false; slots.len()];
                let mut best: Option<usize> = None;
                let mut take = |c: usize| best = Some(best.map_or(c, |b| better(v, b, c)));
                for &(a, b, m) in &self.fixed {
                    used[a] = true;
                    used[b] = true;
                    take(m.winner(v, slots[a], slots[b]));
                }
                for (s, &u) in used.iter().enumerate() {
                    if !u {
                        take(slots[s]);
                    }
                }
                best == Some(y)
            })
            .count();
        hits as f64 / self.data.labels.len().max(1) as f64
    }

    fn cost_matrix(&self) -> (CostMatrix, Vec<Vec<Option<ComparatorMask>>>) {
        let n = self.n_slots();
        let mut pairs = Vec::new();
        for i in 0..n {
            for j in i + 1..n {
                pairs.push((i, j));
            }
        }
        let masks = self.greedy_all(&pairs);
        let mut entries = alloc::vec![alloc::vec![None; n]; n];
        let mut table = alloc::vec![alloc::vec![None; n]; n];
        for ((i, j), m) in pairs.into_iter().zip(masks) {
            entries[i][j] = Some(m.kept());
            entries[j][i] = Some(m.kept());
            table[i][j] = Some(m);
        }
        (CostMatrix { entries }, table)
    }

    #[cfg(feature = "parallel")]
    fn greedy_all(&self, pairs: &[(usize, usize)]) -> Vec<ComparatorMask> {
        use rayon::prelude::*;
        pairs.par_iter().map(|&(i, j)| self.greedy(i, j)).collect()
    }

    #[cfg(not(feature = "parallel"))]
    fn greedy_all(&self, pairs: &[(usize, usize)]) -> Vec<ComparatorMask> {
        pairs.iter().map(|&(i, j)| self.greedy(i, j)).collect()
    }
}

/// Fits a bracket on precomputed output values.
pub fn build_plan_from_values(data: &PlanData<'_>, n_outputs: usize) -> Result<ArgmaxPlan> {
    if n_outputs < 2 {
        return Err(Error::TooFewOutputs(n_outputs));
    }
    if data.width == 0 || data.width > 63 {
        return Err(Error::ShapeMismatch("comparator width must be in 1..=63".into()));
    }
    let mut stage = Stage {
        data,
        slots: alloc::vec![(0..n_outputs).collect(); data.labels.len()],
        fixed: Vec::new(),
    };
    let mut stages = Vec::new();
    while stage.n_slots() > 1 {
        let (costs, table) = stage.cost_matrix();
        let pairs = hungarian_assign(&costs)?;
        let mut comps = Vec::with_capacity(pairs.len());
        for (i, j) in pairs {
            let running = stage.running();
            let mut mask = table[i][j].clone().expect("pair was scored");
            if !within_guard(stage.accuracy_with(i, j, &mask), running, data.guard) {
                mask = stage.greedy(i, j);
            }
            stage.fixed.push((i, j, mask.compile()));
            comps.push(Comparator {
                a: i,
                b: j,
                kept_bits: mask.kept_bits,
            });
        }
        let fixed = core::mem::take(&mut stage.fixed);
        stage.slots = stage
            .slots
            .iter()
            .zip(data.values)
            .map(|(slots, v)| advance(slots, &fixed, v))
            .collect();
        stages.push(comps);
    }
    Ok(ArgmaxPlan {
        n_outputs,
        width: data.width,
        stages,
    })
}

fn train_values(m: &QuantMlp, mask: Option<&SummandMask>, train: &QuantizedDataset) -> Result<Vec<Vec<i64>>> {
    if train.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(Evaluator::new(m, mask)?.output_matrix(train))
}

/// Fits an approximate argmax bracket for a (possibly summand-masked) model
/// on the train set.
pub fn build_plan(m: &QuantMlp, mask: Option<&SummandMask>, train: &QuantizedDataset) -> Result<ArgmaxPlan> {
    let values = train_values(m, mask, train)?;
    let data = PlanData {
        values: &values,
        labels: &train.labels,
        width: output_width(m),
        guard: DEFAULT_GUARD,
    };
    build_plan_from_values(&data, m.topology.n_outputs)
}

/// Minimal bit subset for comparing neurons `i` and `j` in the first stage,
/// every other comparison exact.
pub fn greedy_bit_select(
    m: &QuantMlp,
    mask: Option<&SummandMask>,
    train: &QuantizedDataset,
    i: usize,
    j: usize,
) -> Result<ComparatorMask> {
    let values = train_values(m, mask, train)?;
    let data = PlanData {
        values: &values,
        labels: &train.labels,
        width: output_width(m),
        guard: DEFAULT_GUARD,
    };
    greedy_bit_select_from_values(&data, m.topology.n_outputs, i, j)
}

/// [`greedy_bit_select`] on precomputed output values.
pub fn greedy_bit_select_from_values(
    data: &PlanData<'_>,
    n_outputs: usize,
    i: usize,
    j: usize,
) -> Result<ComparatorMask> {
    if i == j || i >= n_outputs || j >= n_outputs {
        return Err(Error::ShapeMismatch(alloc::format!(
            "cannot compare neurons {i} and {j}"
        )));
    }
    let stage = Stage {
        data,
        slots: alloc::vec![(0..n_outputs).collect(); data.values.len()],
        fixed: Vec::new(),
    };
    Ok(stage.greedy(i, j))
}
