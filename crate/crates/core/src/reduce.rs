//! Column-wise carry-save reduction shared by the counting oracle and the
//! netlist builder.
//!
//! Every stage applies `floor(h / 3)` full adders to each column holding
//! `h >= 3` bits; sums stay in the column and carries move one column left
//! for the next stage. Reduction stops once every column holds at most two
//! bits, which a ripple carry-propagate adder then sums. Each full adder
//! removes exactly two bits from its column, so a column that receives `n`
//! bits in total (own bits plus incoming carries) uses `ceil((n - 2) / 2)`
//! full adders regardless of staging.

use alloc::vec::Vec;

/// A 3:2 and 2:2 counter over some bit representation.
pub trait Compressor {
    type Bit: Clone;

    /// Returns `(sum, carry)`.
    fn full_add(&mut self, a: Self::Bit, b: Self::Bit, c: Self::Bit) -> (Self::Bit, Self::Bit);
    fn half_add(&mut self, a: Self::Bit, b: Self::Bit) -> (Self::Bit, Self::Bit);
    fn zero(&mut self) -> Self::Bit;
}

/// Reduces `columns` (index = bit weight) until no column holds more than
/// two bits. Returns the number of stages used.
pub fn reduce_columns<C: Compressor>(c: &mut C, columns: &mut Vec<Vec<C::Bit>>) -> u32 {
    let mut stages = 0;
    while columns.iter().any(|col| col.len() > 2) {
        stages += 1;
        let mut next: Vec<Vec<C::Bit>> = (0..=columns.len()).map(|_| Vec::new()).collect();
        for (k, col) in columns.drain(..).enumerate() {
            let triples = col.len() / 3;
            let mut bits = col.into_iter();
            for _ in 0..triples {
                let (a, b, d) = (bits.next(), bits.next(), bits.next());
                let (s, cy) = c.full_add(a.unwrap(), b.unwrap(), d.unwrap());
                next[k].push(s);
                next[k + 1].push(cy);
            }
            next[k].extend(bits);
        }
        while next.last().is_some_and(Vec::is_empty) {
            next.pop();
        }
        *columns = next;
    }
    stages
}

/// Ripple carry-propagate addition of columns holding at most two bits each
/// (plus an optional carry into column 0). Produces `width` result bits;
/// anything above is discarded (modular arithmetic).
pub fn ripple<C: Compressor>(
    c: &mut C,
    columns: &[Vec<C::Bit>],
    width: usize,
    carry_in: Option<C::Bit>,
) -> Vec<C::Bit> {
    let mut carry = carry_in;
    let mut out = Vec::with_capacity(width);
    for k in 0..width {
        let mut bits: Vec<C::Bit> = columns.get(k).cloned().unwrap_or_default();
        debug_assert!(bits.len() <= 2, "column {k} not reduced");
        bits.extend(carry.take());
        let mut it = bits.into_iter();
        match (it.next(), it.next(), it.next()) {
            (None, _, _) => out.push(c.zero()),
            (Some(a), None, _) => out.push(a),
            (Some(a), Some(b), None) => {
                let (s, cy) = c.half_add(a, b);
                out.push(s);
                carry = Some(cy);
            }
            (Some(a), Some(b), Some(d)) => {
                let (s, cy) = c.full_add(a, b, d);
                out.push(s);
                carry = Some(cy);
            }
        }
    }
    out
}

/// Structural counter: bits carry no value, only presence.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct Counter {
    pub full_adders: u64,
    pub half_adders: u64,
}

impl Compressor for Counter {
    type Bit = ();

    fn full_add(&mut self, _: (), _: (), _: ()) -> ((), ()) {
        self.full_adders += 1;
        ((), ())
    }

    fn half_add(&mut self, _: (), _: ()) -> ((), ()) {
        self.half_adders += 1;
        ((), ())
    }

    fn zero(&mut self) {}
}
