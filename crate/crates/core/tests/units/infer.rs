use bespoke_core::dataset::*;
use bespoke_core::infer::*;
use bespoke_core::mlp::*;
use bespoke_core::Error;

fn w(sign: i8, e: i8) -> Po2Weight {
    Po2Weight::new(sign, e)
}

/// One input layer neuron feeding a 2-output identity readout.
fn probe(hidden: Vec<Po2Weight>, bias: Po2Weight, trunc: u32) -> QuantMlp {
    let n = hidden.len();
    QuantMlp {
        topology: Topology::new(n, 1, 2).unwrap(),
        input_bits: 4,
        qrelu: QReluConfig {
            out_bits: 8,
            truncate_lsb: vec![trunc],
        },
        layers: vec![
            QuantLayer {
                weights: vec![hidden],
                biases: vec![bias],
            },
            QuantLayer {
                weights: vec![vec![w(1, 0)], vec![Po2Weight::ZERO]],
                biases: vec![Po2Weight::ZERO, Po2Weight::ZERO],
            },
        ],
    }
}

fn hidden_out(m: &QuantMlp, x: &[u32]) -> i64 {
    Evaluator::new(m, None).unwrap().output_values(x)[0]
}

#[test]
fn opposite_weights_cancel() {
    let m = probe(vec![w(1, 0), w(-1, 0)], Po2Weight::ZERO, 0);
    assert_eq!(hidden_out(&m, &[5, 5]), 0);
}

#[test]
fn fractional_weight_shifts_right() {
    let m = probe(vec![w(1, -2)], Po2Weight::ZERO, 0);
    assert_eq!(hidden_out(&m, &[5]), 1);
}

#[test]
fn bias_joins_accumulator() {
    let m = probe(vec![w(1, 0)], w(-1, 2), 0);
    assert_eq!(hidden_out(&m, &[5]), 1);
    assert_eq!(hidden_out(&m, &[3]), 0);
}

#[test]
fn neuron_plan_splits_by_sign() {
    let p = NeuronPlan::new(&[w(1, 0), Po2Weight::ZERO, w(-1, 3)], w(1, 1));
    assert_eq!(p.pos_weights, vec![(0, 0)]);
    assert_eq!(p.neg_weights, vec![(2, 3)]);
}

#[test]
fn equal_outputs_pick_lower_index() {
    assert_eq!(argmax_i64(&[3, 7, 7, 1]), 1);
    assert_eq!(argmax_i64(&[-2, -2]), 0);
}

#[test]
fn widths_cover_extremes() {
    assert_eq!(signed_width(0, 0), 1);
    assert_eq!(signed_width(-1, 0), 2);
    assert_eq!(signed_width(-15, 15), 5);
    assert_eq!(signed_width(0, 16), 6);
}

#[test]
fn empty_dataset_is_an_error() {
    let m = probe(vec![w(1, 0)], Po2Weight::ZERO, 0);
    let d = QuantizedDataset {
        input_bits: 4,
        features: vec![],
        labels: vec![],
    };
    assert_eq!(accuracy_exact(&m, &d), Err(Error::EmptyDataset));
}
