use bespoke_core::dataset::*;
use bespoke_core::mlp::*;
use bespoke_core::Error;
use bespoke_core::{infer, rng};
use rand::Rng;

fn blobs() -> Dataset {
    // Two separable clusters around (0.2, 0.2) and (0.8, 0.8).
    let mut r = rng::stream(99, &[]);
    let mut features = Vec::new();
    let mut labels = Vec::new();
    for i in 0..20 {
        let c = if i % 2 == 0 { 0.2 } else { 0.8 };
        features.push(vec![c + r.gen_range(-0.1..0.1), c + r.gen_range(-0.1..0.1)]);
        labels.push(i % 2);
    }
    Dataset::new("blobs", features, labels, 2).unwrap()
}

#[test]
fn separable_blobs_reach_full_accuracy() {
    let d = blobs();
    let t = Topology::new(2, 2, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 200,
        seed: 3,
        ..TrainConfig::default()
    };
    let m = train_float(&d, t, &cfg).unwrap();
    assert_eq!(accuracy_float(&m, &d), 1.0);
}

#[test]
fn zero_epochs_return_initialization() {
    let d = blobs();
    let t = Topology::new(2, 2, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 0,
        seed: 5,
        ..TrainConfig::default()
    };
    assert_eq!(train_float(&d, t, &cfg).unwrap(), init_float(t, 5));
}

#[test]
fn training_is_seed_deterministic() {
    let d = blobs();
    let t = Topology::new(2, 3, 2).unwrap();
    let cfg = TrainConfig {
        epochs: 20,
        seed: 11,
        ..TrainConfig::default()
    };
    assert_eq!(train_float(&d, t, &cfg).unwrap(), train_float(&d, t, &cfg).unwrap());
}

#[test]
fn dimension_mismatch_is_rejected() {
    let d = blobs();
    let t = Topology::new(3, 2, 2).unwrap();
    assert!(matches!(
        train_float(&d, t, &TrainConfig::default()),
        Err(Error::DimensionMismatch(_))
    ));
}

#[test]
fn diverging_training_reports_epoch() {
    let d = blobs();
    let t = Topology::new(2, 2, 2).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1.0e300,
        epochs: 5,
        ..TrainConfig::default()
    };
    assert!(matches!(train_float(&d, t, &cfg), Err(Error::NonFiniteLoss(_))));
}

/// Float loss on a tiny net, used by the finite-difference oracle.
fn float_loss(m: &FloatMlp, xs: &[&[f64]], ys: &[usize]) -> f64 {
    xs.iter()
        .zip(ys)
        .map(|(x, &y)| {
            let l = m.logits(x);
            let max = l.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = libm::log(l.iter().map(|v| libm::exp(v - max)).sum::<f64>()) + max;
            lse - l[y]
        })
        .sum::<f64>()
        / xs.len() as f64
}

#[test]
fn disabled_quantizers_match_finite_differences() {
    let t = Topology::new(1, 1, 2).unwrap();
    let mut m = FloatMlp::zeros(t);
    m.hidden.weights[0][0] = 0.7;
    m.hidden.biases[0] = 0.2;
    m.output.weights[0][0] = -0.4;
    m.output.weights[1][0] = 0.9;
    m.output.biases = vec![0.1, -0.3];
    let xs: Vec<&[f64]> = vec![&[0.3], &[0.9], &[0.55]];
    let ys = [0, 1, 1];
    let (_, g) = loss_and_gradient(&m, Quantizers::Disabled, &xs, &ys);

    let h = 1e-6;
    let check = |get: &dyn Fn(&mut FloatMlp) -> &mut f64, analytic: f64| {
        let mut p = m.clone();
        *get(&mut p) += h;
        let up = float_loss(&p, &xs, &ys);
        *get(&mut p) -= 2.0 * h;
        let down = float_loss(&p, &xs, &ys);
        let numeric = (up - down) / (2.0 * h);
        let rel = (numeric - analytic).abs() / numeric.abs().max(1e-8);
        assert!(rel < 1e-4, "numeric {numeric} analytic {analytic}");
    };
    check(&|p| &mut p.hidden.weights[0][0], g.hidden.weights[0][0]);
    check(&|p| &mut p.hidden.biases[0], g.hidden.biases[0]);
    check(&|p| &mut p.output.weights[0][0], g.output.weights[0][0]);
    check(&|p| &mut p.output.weights[1][0], g.output.weights[1][0]);
    check(&|p| &mut p.output.biases[1], g.output.biases[1]);
}

#[test]
fn quantized_forward_matches_integer_inference() {
    let d = blobs();
    let t = Topology::new(2, 3, 2).unwrap();
    let m = train_float(
        &d,
        t,
        &TrainConfig {
            epochs: 30,
            ..Default::default()
        },
    )
    .unwrap();
    let q = bespoke_core::dataset::quantize_inputs(&d, 4).unwrap();
    let qrelu = QReluConfig {
        out_bits: 8,
        truncate_lsb: vec![0, 1, 2],
    };
    let ctx = QuantContext::new(4, &qrelu, ExponentRange::default());
    let qm = ctx.quantize(&m, 4);
    for x in &q.features {
        let xf: Vec<f64> = x.iter().map(|&v| f64::from(v) / 15.0).collect();
        assert_eq!(predict_quantized(&m, &ctx, &xf), infer::forward_exact(&qm, x));
    }
}

#[test]
fn exact_po2_weights_survive_zero_epoch_qat() {
    let t = Topology::new(2, 2, 2).unwrap();
    let mut m = FloatMlp::zeros(t);
    m.hidden.weights = vec![vec![0.5, -2.0], vec![0.25, 1.0]];
    m.output.weights = vec![vec![1.0, -0.5], vec![-1.0, 4.0]];
    let q = bespoke_core::dataset::quantize_inputs(&blobs(), 4).unwrap();
    let out = qat_retrain(
        &m,
        &q,
        &QatConfig {
            epochs: 0,
            ..Default::default()
        },
    )
    .unwrap();
    let hidden: Vec<Vec<f64>> = out
        .model
        .hidden()
        .weights
        .iter()
        .map(|r| r.iter().map(Po2Weight::value).collect())
        .collect();
    assert_eq!(hidden, m.hidden.weights);
    // Truncation is zero here, so output weights are unscaled.
    assert_eq!(out.model.qrelu.truncate_lsb, vec![0, 0]);
    let output: Vec<Vec<f64>> = out
        .model
        .output()
        .weights
        .iter()
        .map(|r| r.iter().map(Po2Weight::value).collect())
        .collect();
    assert_eq!(output, m.output.weights);
}
