use bespoke_core::adder_tree::*;
use bespoke_core::mlp::*;
use bespoke_core::Error;

fn single_neuron(weights: Vec<Po2Weight>) -> QuantMlp {
    let n = weights.len();
    QuantMlp {
        topology: Topology::new(n, 1, 1).unwrap(),
        input_bits: 4,
        qrelu: QReluConfig::identity(1),
        layers: vec![
            QuantLayer {
                weights: vec![weights],
                biases: vec![Po2Weight::ZERO],
            },
            QuantLayer {
                weights: vec![vec![Po2Weight::ZERO]],
                biases: vec![Po2Weight::ZERO],
            },
        ],
    }
}

#[test]
fn unshifted_rows_share_columns() {
    let l = build_layout(&single_neuron(vec![Po2Weight::new(1, 0); 2]));
    let t = &l.trees[0];
    assert_eq!((t.rows.len(), t.width()), (2, 4));
    assert_eq!(t.column_counts(&[true; 8]), vec![2, 2, 2, 2]);
}

#[test]
fn shifted_rows_overlap_in_middle_columns() {
    let l = build_layout(&single_neuron(vec![Po2Weight::new(1, 0), Po2Weight::new(1, 2)]));
    let t = &l.trees[0];
    assert_eq!(t.width(), 6);
    assert_eq!(t.column_counts(&[true; 8]), vec![1, 1, 2, 2, 1, 1]);
    let zeros = l
        .bits()
        .iter()
        .filter(|b| b.tree == t.id && b.kind == BitKind::ConstantZero)
        .count();
    assert_eq!(zeros, 4);
}

#[test]
fn negative_only_neuron_has_empty_positive_tree() {
    let l = build_layout(&single_neuron(vec![Po2Weight::new(-1, 0), Po2Weight::new(-1, 1)]));
    assert_eq!(l.trees[0].id.sign, Sign::Pos);
    assert_eq!(l.trees[0].n_genes(), 0);
    assert_eq!(l.trees[1].n_genes(), 8);
}

#[test]
fn column_recurrence_examples() {
    assert_eq!(fa_count_column(4, 0), 1);
    assert_eq!(fa_count_column(2, 0), 0);
    assert_eq!(fa_count_column(0, 0), 0);
    assert_eq!(fa_count_columns(&[3, 3]), 2);
}

#[test]
fn all_remove_costs_nothing() {
    let l = build_layout(&single_neuron(vec![Po2Weight::new(1, 0); 5]));
    assert_eq!(estimate_area(&l, &Chromosome::all_remove(l.n_genes())), Ok(0));
}

#[test]
fn length_mismatch_is_rejected() {
    let l = build_layout(&single_neuron(vec![Po2Weight::new(1, 0); 2]));
    assert_eq!(
        estimate_area(&l, &Chromosome::all_keep(3)),
        Err(Error::ChromosomeLength { expected: 8, got: 3 })
    );
}

#[test]
fn chromosome_text_round_trip() {
    let c: Chromosome = "10110".parse().unwrap();
    assert_eq!(c.genes, vec![true, false, true, true, false]);
    assert_eq!(c.to_string(), "10110");
    assert!("10x".parse::<Chromosome>().is_err());
}

#[test]
fn oracle_small_cases() {
    assert_eq!(
        reduce_counts(&[3]),
        ReductionCount {
            full_adders: 1,
            half_adders: 0,
            cpa_full_adders: 0,
            stages: 1
        }
    );
    assert_eq!(reduce_counts(&[2]).full_adders, 0);
}
