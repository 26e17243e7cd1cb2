use bespoke_core::mlp::*;
use proptest::prelude::*;

fn q(w: f64) -> Po2Weight {
    Po2Weight::quantize(w, ExponentRange::default())
}

#[test]
fn reference_values() {
    assert_eq!(q(0.25), Po2Weight::new(1, -2));
    assert_eq!(q(0.3), Po2Weight::new(1, -2));
    assert_eq!(q(-1.0), Po2Weight::new(-1, 0));
    assert!(q(0.0).is_zero());
}

#[test]
fn tiny_magnitudes_become_zero_and_large_ones_saturate() {
    let t = libm::exp2(-7.5);
    assert!(q(t * 0.99).is_zero());
    assert_eq!(q(t * 1.01), Po2Weight::new(1, -7));
    assert_eq!(q(-1.0e6), Po2Weight::new(-1, 7));
}

#[test]
fn weight_bits_map_to_range() {
    assert_eq!(ExponentRange::from_weight_bits(8), ExponentRange::default());
    assert_eq!(ExponentRange::from_weight_bits(4), ExponentRange { min: -3, max: 3 });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2000))]

    #[test]
    fn quantizer_is_idempotent(w in -300.0f64..300.0) {
        let once = q(w);
        prop_assert_eq!(q(once.value()), once);
    }

    #[test]
    fn magnitude_is_zero_or_in_range(w in proptest::num::f64::NORMAL) {
        let p = q(w);
        if !p.is_zero() {
            prop_assert!((-7..=7).contains(&p.exponent));
            prop_assert_eq!(libm::fabs(p.value()), libm::exp2(f64::from(p.exponent)));
            prop_assert_eq!(p.sign, if w < 0.0 { -1 } else { 1 });
        }
    }
}
