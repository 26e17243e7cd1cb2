//! Summand-bit layout of the per-neuron adder trees and the full-adder
//! surrogate area model.
//!
//! Every neuron owns two trees, one per weight sign. A nonzero weight `2^e`
//! applied to a `B`-bit input contributes one row of `B` variable bits,
//! shifted by `e` relative to the tree's smallest exponent. Positions inside
//! the tree's span that no row covers are constant zeros. Biases are
//! constants and never appear in the layout.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::infer::neuron_plans;
use crate::mlp::QuantMlp;
use crate::reduce::{self, Counter};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Pos,
    Neg,
}

/// `(layer, neuron, sign)` of an adder tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TreeId {
    pub layer: usize,
    pub neuron: usize,
    pub sign: Sign,
}

/// One shifted operand of a tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeRow {
    pub input: usize,
    pub exponent: i8,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderTree {
    pub id: TreeId,
    pub rows: Vec<TreeRow>,
    /// Width of every operand (input bits for the hidden layer, QRelu bits
    /// for the output layer).
    pub row_bits: u32,
    /// Exponent aligned to column 0.
    pub min_exponent: i8,
    /// Index of this tree's first gene in the chromosome.
    pub gene_offset: usize,
}

impl AdderTree {
    pub fn n_genes(&self) -> usize {
        self.rows.len() * self.row_bits as usize
    }

    pub fn gene(&self, row: usize, bit: u32) -> usize {
        self.gene_offset + row * self.row_bits as usize + bit as usize
    }

    pub fn column(&self, row: usize, bit: u32) -> usize {
        (i32::from(self.rows[row].exponent) - i32::from(self.min_exponent)) as usize + bit as usize
    }

    /// Number of columns spanned by the summands.
    pub fn width(&self) -> usize {
        (0..self.rows.len())
            .map(|r| self.column(r, self.row_bits - 1) + 1)
            .max()
            .unwrap_or(0)
    }

    /// Kept-bit count per column under `genes` (the whole chromosome).
    pub fn column_counts(&self, genes: &[bool]) -> Vec<u64> {
        let mut counts = alloc::vec![0u64; self.width()];
        for r in 0..self.rows.len() {
            for b in 0..self.row_bits {
                if genes[self.gene(r, b)] {
                    counts[self.column(r, b)] += 1;
                }
            }
        }
        counts
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BitKind {
    Variable { gene: usize },
    ConstantZero,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummandBit {
    pub tree: TreeId,
    pub row: usize,
    pub column: usize,
    pub kind: BitKind,
}

/// All adder trees of a model in canonical order: layer, neuron, positive
/// before negative. Genes follow the same order, then row, then bit LSB
/// first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdderTreeLayout {
    pub trees: Vec<AdderTree>,
}

impl AdderTreeLayout {
    pub fn n_genes(&self) -> usize {
        self.trees.last().map_or(0, |t| t.gene_offset + t.n_genes())
    }

    pub fn tree(&self, id: TreeId) -> Option<&AdderTree> {
        self.trees.iter().find(|t| t.id == id)
    }

    /// Every summand position of every tree, including constant zeros.
    pub fn bits(&self) -> Vec<SummandBit> {
        let mut out = Vec::new();
        for t in &self.trees {
            let w = t.width();
            for (r, row) in t.rows.iter().enumerate() {
                let lo = (i32::from(row.exponent) - i32::from(t.min_exponent)) as usize;
                for column in 0..w {
                    let kind = if (lo..lo + t.row_bits as usize).contains(&column) {
                        BitKind::Variable {
                            gene: t.gene(r, (column - lo) as u32),
                        }
                    } else {
                        BitKind::ConstantZero
                    };
                    out.push(SummandBit {
                        tree: t.id,
                        row: r,
                        column,
                        kind,
                    });
                }
            }
        }
        out
    }
}

pub fn build_layout(m: &QuantMlp) -> AdderTreeLayout {
    let mut trees = Vec::new();
    let mut offset = 0;
    for (l, layer) in m.layers.iter().enumerate() {
        for (j, plan) in neuron_plans(layer).iter().enumerate() {
            for sign in [Sign::Pos, Sign::Neg] {
                let rows: Vec<TreeRow> = plan
                    .weights(sign)
                    .iter()
                    .map(|&(input, exponent)| TreeRow { input, exponent })
                    .collect();
                let tree = AdderTree {
                    id: TreeId {
                        layer: l,
                        neuron: j,
                        sign,
                    },
                    min_exponent: rows.iter().map(|r| r.exponent).min().unwrap_or(0),
                    rows,
                    row_bits: m.layer_input_bits(l),
                    gene_offset: offset,
                };
                offset += tree.n_genes();
                trees.push(tree);
            }
        }
    }
    AdderTreeLayout { trees }
}

/// Keep (`true`) or remove (`false`) for every variable summand bit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Chromosome {
    pub genes: Vec<bool>,
}

impl Chromosome {
    pub fn all_keep(n: usize) -> Self {
        Chromosome {
            genes: alloc::vec![true; n],
        }
    }

    pub fn all_remove(n: usize) -> Self {
        Chromosome {
            genes: alloc::vec![false; n],
        }
    }

    pub fn len(&self) -> usize {
        self.genes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.genes.is_empty()
    }

    pub fn kept(&self) -> usize {
        self.genes.iter().filter(|&&g| g).count()
    }

    /// `self` keeps no bit that `other` removes.
    pub fn is_subset_of(&self, other: &Chromosome) -> bool {
        self.len() == other.len() && self.genes.iter().zip(&other.genes).all(|(&a, &b)| !a || b)
    }
}

impl fmt::Display for Chromosome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &g in &self.genes {
            f.write_str(if g { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Chromosome {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '1' => Ok(true),
                '0' => Ok(false),
                other => Err(Error::InvalidConfig(alloc::format!(
                    "chromosome character {other:?} is not 0 or 1"
                ))),
            })
            .collect::<Result<Vec<bool>>>()
            .map(|genes| Chromosome { genes })
    }
}

impl Serialize for Chromosome {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Chromosome {
    fn deserialize<D: Deserializer<'de>>(d: D) -> core::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Full adders needed in one column holding `l` bits plus `carry_in`
/// carries from the column to its right. Columns with at most two bits cost
/// nothing.
pub fn fa_count_column(l: u64, carry_in: u64) -> u64 {
    (l + carry_in).saturating_sub(2).div_ceil(2)
}

/// Applies the column recurrence LSB to MSB, continuing past the last
/// column while carries still need compressing.
pub fn fa_count_columns(counts: &[u64]) -> u64 {
    let mut total = 0;
    let mut carry = 0;
    let mut k = 0;
    while k < counts.len() || carry > 0 {
        let l = counts.get(k).copied().unwrap_or(0);
        carry = fa_count_column(l, carry);
        total += carry;
        k += 1;
    }
    total
}

pub fn estimate_tree_area(tree: &AdderTree, c: &Chromosome) -> u64 {
    fa_count_columns(&tree.column_counts(&c.genes))
}

/// Total surrogate full-adder count of all trees.
pub fn estimate_area(layout: &AdderTreeLayout, c: &Chromosome) -> Result<u64> {
    if c.len() != layout.n_genes() {
        return Err(Error::ChromosomeLength {
            expected: layout.n_genes(),
            got: c.len(),
        });
    }
    Ok(layout.trees.iter().map(|t| estimate_tree_area(t, c)).sum())
}

/// Exact adder counts from simulating the reduction of one tree.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReductionCount {
    /// Full adders of the carry-save reduction stages.
    pub full_adders: u64,
    /// Half adders of the final carry-propagate adder.
    pub half_adders: u64,
    /// Full adders of the final carry-propagate adder.
    pub cpa_full_adders: u64,
    pub stages: u32,
}

/// Reduces the kept bits of `tree` stage by stage and counts the adders.
pub fn reduction_oracle(tree: &AdderTree, c: &Chromosome) -> ReductionCount {
    reduce_counts(&tree.column_counts(&c.genes))
}

/// Reduction oracle over raw column occupancy.
pub fn reduce_counts(counts: &[u64]) -> ReductionCount {
    let mut cols: Vec<Vec<()>> = counts.iter().map(|&n| alloc::vec![(); n as usize]).collect();
    let mut red = Counter::default();
    let stages = reduce::reduce_columns(&mut red, &mut cols);
    let mut cpa = Counter::default();
    let width = cols.len() + 1;
    reduce::ripple(&mut cpa, &cols, width, None);
    ReductionCount {
        full_adders: red.full_adders,
        half_adders: cpa.half_adders,
        cpa_full_adders: cpa.full_adders,
        stages,
    }
}
