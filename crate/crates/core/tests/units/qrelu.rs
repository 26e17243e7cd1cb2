use bespoke_core::mlp::*;
use proptest::prelude::*;

#[test]
fn values_within_range_need_no_truncation() {
    let v: Vec<i64> = (0..=255).collect();
    assert_eq!(truncation_for(&v, 8, 0.99), 0);
    let q = QReluConfig::identity(1);
    assert!((0..=255).all(|x| q.apply(0, x) == x as u32));
}

#[test]
fn ten_bit_values_drop_two_lsbs() {
    let v: Vec<i64> = (0..=1023).collect();
    let t = truncation_for(&v, 8, 0.99);
    assert_eq!(t, 2);
    let q = QReluConfig {
        out_bits: 8,
        truncate_lsb: std::vec![t],
    };
    assert_eq!(q.apply(0, 1023), 255);
}

#[test]
fn negative_accumulator_is_nullified() {
    assert_eq!(QReluConfig::identity(1).apply(0, -5), 0);
}

#[test]
fn all_zero_preactivations_keep_full_resolution() {
    assert_eq!(truncation_for(&[0, 0, -3], 8, 0.99), 0);
}

#[test]
fn outliers_beyond_percentile_clip() {
    let mut v: Vec<i64> = (1..=1000).map(|i| i % 200).collect();
    v.extend([5000, 9000]);
    assert_eq!(truncation_for(&v, 8, 0.99), 0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn output_in_range_and_monotone(a in -100_000i64..100_000, d in 0i64..5000, t in 0u32..6) {
        let q = QReluConfig { out_bits: 8, truncate_lsb: std::vec![t] };
        let (lo, hi) = (q.apply(0, a), q.apply(0, a + d));
        prop_assert!(hi <= 255);
        prop_assert!(lo <= hi);
    }
}
