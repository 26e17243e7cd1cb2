use bespoke_core::argmax::*;
use bespoke_core::Error;

fn matrix(rows: &[&[i64]]) -> CostMatrix {
    CostMatrix {
        entries: rows
            .iter()
            .map(|r| r.iter().map(|&v| if v < 0 { None } else { Some(v as u32) }).collect())
            .collect(),
    }
}

#[test]
fn two_candidates_pair_up() {
    let c = matrix(&[&[-1, 1], &[1, -1]]);
    assert_eq!(hungarian_assign(&c).unwrap(), vec![(0, 1)]);
}

#[test]
fn four_candidates_take_cheapest_pairing() {
    let c = matrix(&[&[-1, 4, 1, -1], &[4, -1, -1, 1], &[1, -1, -1, 4], &[-1, 1, 4, -1]]);
    let p = hungarian_assign(&c).unwrap();
    assert_eq!(p, vec![(0, 2), (1, 3)]);
    assert_eq!(c.pairing_cost(&p), Some(2));
}

#[test]
fn all_infinite_is_infeasible() {
    let c = matrix(&[&[-1, -1], &[-1, -1]]);
    assert_eq!(hungarian_assign(&c), Err(Error::NoFeasibleAssignment));
}

#[test]
fn odd_count_leaves_one_out() {
    let c = matrix(&[&[-1, 5, 1], &[5, -1, 2], &[1, 2, -1]]);
    assert_eq!(hungarian_assign(&c).unwrap(), vec![(0, 2)]);
}

fn single(width: u32, kept_bits: Vec<u32>) -> ArgmaxPlan {
    ArgmaxPlan {
        n_outputs: 2,
        width,
        stages: vec![vec![Comparator { a: 0, b: 1, kept_bits }]],
    }
}

#[test]
fn masked_compare_zeroes_dropped_bits() {
    // 4-bit values 5 (0101) and 6 (0110); keep only bit 0.
    assert_eq!(single(4, vec![0]).select(&[5, 6]), 0);
    assert_eq!(single(4, vec![1, 2]).select(&[5, 6]), 1);
}

#[test]
fn kept_sign_bit_compares_signed() {
    assert_eq!(single(4, vec![3]).select(&[-3, 2]), 1);
    // Without the sign bit the negative value looks large.
    assert_eq!(single(4, vec![0, 1, 2]).select(&[-3, 2]), 0);
}

#[test]
fn mask_from_bits_lists_positions() {
    let m = ComparatorMask::from_bits(4, 0b1010);
    assert_eq!(m.kept_bits, vec![1, 3]);
    assert_eq!((m.bits(), m.kept()), (0b1010, 2));
}

#[test]
fn guard_threshold_arithmetic() {
    assert!(within_guard(0.897, 0.90, 0.005));
    assert!(within_guard(0.895, 0.90, 0.005));
    assert!(!within_guard(0.894, 0.90, 0.005));
}

#[test]
fn bracket_shapes() {
    let p = ArgmaxPlan::full_width(2, 5);
    assert_eq!(p.stages.len(), 1);
    assert_eq!(p.n_comparators(), 1);
    let p = ArgmaxPlan::full_width(4, 5);
    assert_eq!(p.stages.iter().map(Vec::len).collect::<Vec<_>>(), vec![2, 1]);
    let p = ArgmaxPlan::full_width(7, 5);
    assert_eq!(p.n_comparators(), 6);
    p.validate().unwrap();
}

#[test]
fn full_width_bracket_is_exact_argmax() {
    let p = ArgmaxPlan::full_width(5, 6);
    for v in [[3, -4, 3, 9, 9], [0, 0, 0, 0, 0], [-32, -1, -2, 31, -32]] {
        assert_eq!(p.select(&v), bespoke_core::infer::argmax_i64(&v));
    }
}

#[test]
fn invariant_pair_drops_every_bit() {
    // Neuron 2 always wins, so the (0, 1) comparator never matters.
    let values: Vec<Vec<i64>> = (0..20).map(|i| vec![i % 5, 3 - i % 4, 20]).collect();
    let labels = vec![2; 20];
    let data = PlanData {
        values: &values,
        labels: &labels,
        width: 6,
        guard: DEFAULT_GUARD,
    };
    assert_eq!(greedy_bit_select_from_values(&data, 3, 0, 1).unwrap().kept(), 0);
    assert!(greedy_bit_select_from_values(&data, 3, 1, 1).is_err());
}

#[test]
fn deciding_msb_is_kept() {
    // Class 1 has bit 4 set, class 0 does not; low bits are noise.
    let values: Vec<Vec<i64>> = (0..40)
        .map(|i| {
            if i % 2 == 0 {
                vec![8 + i % 8, i % 8]
            } else {
                vec![i % 8, 16 + i % 7]
            }
        })
        .collect();
    let labels: Vec<usize> = (0..40).map(|i| i % 2).collect();
    let data = PlanData {
        values: &values,
        labels: &labels,
        width: 6,
        guard: DEFAULT_GUARD,
    };
    let plan = build_plan_from_values(&data, 2).unwrap();
    let kept = &plan.stages[0][0].kept_bits;
    assert!(kept.contains(&4), "{kept:?}");
    let acc = values.iter().zip(&labels).filter(|(v, &y)| plan.select(v) == y).count();
    assert_eq!(acc, 40);
}
