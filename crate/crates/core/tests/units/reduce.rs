use bespoke_core::reduce::*;

/// Adds concrete bit values, to check the schedule computes a sum.
struct Value;

impl Compressor for Value {
    type Bit = bool;
    fn full_add(&mut self, a: bool, b: bool, c: bool) -> (bool, bool) {
        let n = u8::from(a) + u8::from(b) + u8::from(c);
        (n & 1 == 1, n >= 2)
    }
    fn half_add(&mut self, a: bool, b: bool) -> (bool, bool) {
        (a ^ b, a & b)
    }
    fn zero(&mut self) -> bool {
        false
    }
}

#[test]
fn reduction_then_ripple_adds_operands() {
    let operands = [13u32, 7, 15, 9, 1];
    let mut cols: Vec<Vec<bool>> = vec![Vec::new(); 4];
    for v in operands {
        for (k, col) in cols.iter_mut().enumerate() {
            col.push(v >> k & 1 == 1);
        }
    }
    reduce_columns(&mut Value, &mut cols);
    let bits = ripple(&mut Value, &cols, 8, None);
    let sum: u32 = bits.iter().enumerate().map(|(k, &b)| u32::from(b) << k).sum();
    assert_eq!(sum, operands.iter().sum());
}

#[test]
fn triple_column_needs_one_adder_one_stage() {
    let mut c = Counter::default();
    let mut cols = vec![vec![(); 3]];
    assert_eq!(reduce_columns(&mut c, &mut cols), 1);
    assert_eq!(c.full_adders, 1);
}

#[test]
fn pair_column_is_left_to_ripple() {
    let mut c = Counter::default();
    let mut cols = vec![vec![(); 2]];
    assert_eq!(reduce_columns(&mut c, &mut cols), 0);
    assert_eq!(c.full_adders, 0);
    ripple(&mut c, &cols, 2, None);
    assert_eq!(c.half_adders, 1);
}
