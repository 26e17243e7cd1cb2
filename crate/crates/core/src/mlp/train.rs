//! Mini-batch gradient descent for the float baseline and quantization-aware
//! retraining with a straight-through estimator.
//!
//! Both trainers share one forward/backward routine. With quantizers enabled
//! the forward pass reproduces the integer circuit exactly (power-of-two
//! weights, floor to integer units, QRelu truncation and clipping) while the
//! backward pass treats every quantizer as the identity, except that QRelu
//! passes no gradient outside its linear region.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{
    dot, fit_qrelu, DenseLayer, ExponentRange, FloatMlp, Po2Weight, QReluConfig, QuantLayer, QuantMlp, Topology,
    DEFAULT_PERCENTILE, DEFAULT_QRELU_BITS,
};
use crate::dataset::{Dataset, QuantizedDataset};
use crate::error::{Error, Result};
use crate::{infer, rng};

const INIT_STREAM: u64 = 1;
const SHUFFLE_STREAM: u64 = 2;
const QAT_SHUFFLE_STREAM: u64 = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.05,
            epochs: 500,
            batch_size: 32,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QatConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub qrelu_bits: u32,
    pub qrelu_percentile: f64,
    pub exponents: ExponentRange,
}

impl Default for QatConfig {
    fn default() -> Self {
        QatConfig {
            learning_rate: 0.05,
            epochs: 50,
            batch_size: 32,
            seed: 0,
            qrelu_bits: DEFAULT_QRELU_BITS,
            qrelu_percentile: DEFAULT_PERCENTILE,
            exponents: ExponentRange::default(),
        }
    }
}

/// Parameters of the integer circuit that the quantized forward pass mimics.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantContext {
    /// `2^input_bits - 1`: integer input = normalized input times this.
    pub input_scale: f64,
    pub truncate_lsb: Vec<u32>,
    pub out_bits: u32,
    pub exponents: ExponentRange,
}

impl QuantContext {
    pub fn new(input_bits: u32, qrelu: &QReluConfig, exponents: ExponentRange) -> Self {
        QuantContext {
            input_scale: ((1u64 << input_bits) - 1) as f64,
            truncate_lsb: qrelu.truncate_lsb.clone(),
            out_bits: qrelu.out_bits,
            exponents,
        }
    }

    /// Rounds the float parameters to the circuit they describe.
    pub fn quantize(&self, m: &FloatMlp, input_bits: u32) -> QuantMlp {
        let s = self.input_scale;
        let r = self.exponents;
        let hidden = QuantLayer {
            weights: map_matrix(&m.hidden.weights, |_, w| Po2Weight::quantize(w, r)),
            biases: m.hidden.biases.iter().map(|&b| Po2Weight::quantize(b * s, r)).collect(),
        };
        let output = QuantLayer {
            weights: map_matrix(&m.output.weights, |j, v| {
                Po2Weight::quantize(v * libm::exp2(f64::from(self.truncate_lsb[j])), r)
            }),
            biases: m.output.biases.iter().map(|&c| Po2Weight::quantize(c * s, r)).collect(),
        };
        QuantMlp {
            topology: m.topology,
            input_bits,
            qrelu: QReluConfig {
                out_bits: self.out_bits,
                truncate_lsb: self.truncate_lsb.clone(),
            },
            layers: alloc::vec![hidden, output],
        }
    }
}

fn map_matrix<T>(m: &[Vec<f64>], f: impl Fn(usize, f64) -> T) -> Vec<Vec<T>> {
    m.iter()
        .map(|row| row.iter().enumerate().map(|(j, &w)| f(j, w)).collect())
        .collect()
}

/// Whether the forward pass runs through the circuit quantizers.
#[derive(Debug, Clone, Copy)]
pub enum Quantizers<'a> {
    Disabled,
    Enabled(&'a QuantContext),
}

/// Gradient of the mean cross-entropy with respect to every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub hidden: DenseLayer,
    pub output: DenseLayer,
}

/// Float-domain parameters actually used by a forward pass.
struct Effective {
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    /// Hidden biases in integer input units (quantized mode only).
    b1_int: Vec<f64>,
    w2: Vec<Vec<f64>>,
    b2: Vec<f64>,
    /// Output weights and biases in circuit units (quantized mode only).
    w2_int: Vec<Vec<f64>>,
    b2_int: Vec<f64>,
}

impl Effective {
    fn new(m: &FloatMlp, q: Quantizers<'_>) -> Self {
        match q {
            Quantizers::Disabled => Effective {
                w1: m.hidden.weights.clone(),
                b1: m.hidden.biases.clone(),
                b1_int: Vec::new(),
                w2: m.output.weights.clone(),
                b2: m.output.biases.clone(),
                w2_int: Vec::new(),
                b2_int: Vec::new(),
            },
            Quantizers::Enabled(ctx) => {
                let s = ctx.input_scale;
                let r = ctx.exponents;
                let b1_int: Vec<f64> = m
                    .hidden
                    .biases
                    .iter()
                    .map(|&b| Po2Weight::quantize(b * s, r).value())
                    .collect();
                let w2_int = map_matrix(&m.output.weights, |j, v| {
                    Po2Weight::quantize(v * libm::exp2(f64::from(ctx.truncate_lsb[j])), r).value()
                });
                let b2_int: Vec<f64> = m
                    .output
                    .biases
                    .iter()
                    .map(|&c| Po2Weight::quantize(c * s, r).value())
                    .collect();
                Effective {
                    w1: map_matrix(&m.hidden.weights, |_, w| Po2Weight::quantize(w, r).value()),
                    b1: b1_int.iter().map(|b| b / s).collect(),
                    b1_int,
                    w2: w2_int
                        .iter()
                        .map(|row| {
                            row.iter()
                                .zip(&ctx.truncate_lsb)
                                .map(|(v, &t)| v / libm::exp2(f64::from(t)))
                                .collect()
                        })
                        .collect(),
                    b2: b2_int.iter().map(|c| c / s).collect(),
                    w2_int,
                    b2_int,
                }
            }
        }
    }
}

struct Activations {
    h: Vec<f64>,
    /// Derivative of `h` with respect to the pre-activation.
    dh: Vec<f64>,
    logits: Vec<f64>,
}

fn forward(eff: &Effective, q: Quantizers<'_>, x: &[f64]) -> Activations {
    let n_hidden = eff.b1.len();
    let mut h = Vec::with_capacity(n_hidden);
    let mut dh = Vec::with_capacity(n_hidden);
    match q {
        Quantizers::Disabled => {
            for (w, b) in eff.w1.iter().zip(&eff.b1) {
                let z = dot(w, x) + b;
                h.push(z.max(0.0));
                dh.push(if z > 0.0 { 1.0 } else { 0.0 });
            }
            let logits = eff.w2.iter().zip(&eff.b2).map(|(w, b)| dot(w, &h) + b).collect();
            Activations { h, dh, logits }
        }
        Quantizers::Enabled(ctx) => {
            // Integer-unit arithmetic; every value is a dyadic rational small
            // enough to be exact in f64, so this matches the circuit bit for bit.
            let s = ctx.input_scale;
            let top = ((1u64 << ctx.out_bits) - 1) as f64;
            let mut hq = Vec::with_capacity(n_hidden);
            for (j, (w, b)) in eff.w1.iter().zip(&eff.b1_int).enumerate() {
                let z_int = w.iter().zip(x).map(|(wi, xi)| wi * libm::round(xi * s)).sum::<f64>() + b;
                let step = libm::exp2(f64::from(ctx.truncate_lsb[j]));
                let q = libm::floor(libm::floor(z_int).max(0.0) / step).min(top);
                hq.push(q);
                h.push(q * step / s);
                dh.push(if z_int > 0.0 && z_int < (top + 1.0) * step {
                    1.0
                } else {
                    0.0
                });
            }
            let logits = eff
                .w2_int
                .iter()
                .zip(&eff.b2_int)
                .map(|(w, b)| (dot(w, &hq) + b) / s)
                .collect();
            Activations { h, dh, logits }
        }
    }
}

fn softmax_xent(logits: &[f64], label: usize, dlogits: &mut [f64]) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.iter().map(|&l| libm::exp(l - max)).sum();
    for (d, &l) in dlogits.iter_mut().zip(logits) {
        *d = libm::exp(l - max) / sum;
    }
    dlogits[label] -= 1.0;
    libm::log(sum) + max - logits[label]
}

/// Mean softmax cross-entropy over `batch` and its gradient. `xs` are
/// normalized inputs in `[0, 1]`.
pub fn loss_and_gradient(m: &FloatMlp, q: Quantizers<'_>, xs: &[&[f64]], labels: &[usize]) -> (f64, Gradient) {
    let eff = Effective::new(m, q);
    accumulate(&eff, m.topology, q, xs, labels)
}

fn accumulate(eff: &Effective, t: Topology, q: Quantizers<'_>, xs: &[&[f64]], labels: &[usize]) -> (f64, Gradient) {
    let mut g = Gradient {
        hidden: DenseLayer::zeros(t.n_inputs, t.n_hidden),
        output: DenseLayer::zeros(t.n_hidden, t.n_outputs),
    };
    let mut loss = 0.0;
    let mut dlogits = alloc::vec![0.0; t.n_outputs];
    let mut dz = alloc::vec![0.0; t.n_hidden];
    for (x, &y) in xs.iter().zip(labels) {
        let a = forward(eff, q, x);
        loss += softmax_xent(&a.logits, y, &mut dlogits);
        for (k, &d) in dlogits.iter().enumerate() {
            g.output.biases[k] += d;
            for (gw, &hj) in g.output.weights[k].iter_mut().zip(&a.h) {
                *gw += d * hj;
            }
        }
        for (j, dzj) in dz.iter_mut().enumerate() {
            let back: f64 = dlogits.iter().zip(&eff.w2).map(|(d, w)| d * w[j]).sum();
            *dzj = back * a.dh[j];
        }
        for (j, &d) in dz.iter().enumerate() {
            if d == 0.0 {
                continue;
            }
            g.hidden.biases[j] += d;
            for (gw, &xi) in g.hidden.weights[j].iter_mut().zip(x.iter()) {
                *gw += d * xi;
            }
        }
    }
    let n = xs.len().max(1) as f64;
    for layer in [&mut g.hidden, &mut g.output] {
        layer.biases.iter_mut().for_each(|b| *b /= n);
        layer.weights.iter_mut().flatten().for_each(|w| *w /= n);
    }
    (loss / n, g)
}

fn sgd_step(m: &mut FloatMlp, g: &Gradient, lr: f64) {
    for (p, d) in [(&mut m.hidden, &g.hidden), (&mut m.output, &g.output)] {
        for (w, dw) in p.weights.iter_mut().flatten().zip(d.weights.iter().flatten()) {
            *w -= lr * dw;
        }
        for (b, db) in p.biases.iter_mut().zip(&d.biases) {
            *b -= lr * db;
        }
    }
}

/// Runs one shuffled pass over `xs`. Returns the mean batch loss.
#[allow(clippy::too_many_arguments)]
fn run_epoch(
    m: &mut FloatMlp,
    q: Quantizers<'_>,
    xs: &[Vec<f64>],
    labels: &[usize],
    batch: usize,
    lr: f64,
    rng: &mut rng::StreamRng,
    epoch: usize,
) -> Result<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    let mut batches = 0;
    for chunk in order.chunks(batch.max(1)) {
        let bx: Vec<&[f64]> = chunk.iter().map(|&i| xs[i].as_slice()).collect();
        let by: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
        let (loss, g) = loss_and_gradient(m, q, &bx, &by);
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(epoch));
        }
        sgd_step(m, &g, lr);
        total += loss;
        batches += 1;
    }
    Ok(total / f64::from(batches.max(1)))
}

pub fn accuracy_float(m: &FloatMlp, d: &Dataset) -> f64 {
    if d.is_empty() {
        return 0.0;
    }
    let hits = d
        .features
        .iter()
        .zip(&d.labels)
        .filter(|(x, &y)| m.predict(x) == y)
        .count();
    hits as f64 / d.len() as f64
}

fn check_data(t: Topology, n_features: usize, labels: &[usize]) -> Result<()> {
    if labels.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if n_features != t.n_inputs {
        return Err(Error::DimensionMismatch(alloc::format!(
            "dataset has {n_features} features, topology {t} expects {}",
            t.n_inputs
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= t.n_outputs) {
        return Err(Error::DimensionMismatch(alloc::format!(
            "label {l} does not fit {} outputs",
            t.n_outputs
        )));
    }
    Ok(())
}

/// Seeded starting weights used by [`train_float`].
pub fn init_float(topology: Topology, seed: u64) -> FloatMlp {
    let mut rng = rng::stream(seed, &[INIT_STREAM]);
    let mut m = FloatMlp::zeros(topology);
    let mut fill = |layer: &mut DenseLayer, fan_in: usize, fan_out: usize| {
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        for w in layer.weights.iter_mut().flatten() {
            *w = rng.gen_range(-limit..limit);
        }
    };
    fill(&mut m.hidden, topology.n_inputs, topology.n_hidden);
    fill(&mut m.output, topology.n_hidden, topology.n_outputs);
    // Keeps narrow Relu layers from starting dead.
    m.hidden.biases.iter_mut().for_each(|b| *b = 0.1);
    m
}

/// Trains the float baseline. Returns the parameters with the best train
/// accuracy seen at the end of any epoch (including the initialization).
pub fn train_float(train: &Dataset, topology: Topology, cfg: &TrainConfig) -> Result<FloatMlp> {
    check_data(topology, train.n_features(), &train.labels)?;
    let mut m = init_float(topology, cfg.seed);
    let mut best = (accuracy_float(&m, train), m.clone());
    let mut rng = rng::stream(cfg.seed, &[SHUFFLE_STREAM]);
    for epoch in 0..cfg.epochs {
        run_epoch(
            &mut m,
            Quantizers::Disabled,
            &train.features,
            &train.labels,
            cfg.batch_size,
            cfg.learning_rate,
            &mut rng,
            epoch,
        )?;
        let acc = accuracy_float(&m, train);
        if acc > best.0 {
            best = (acc, m.clone());
        }
    }
    Ok(best.1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct QatOutcome {
    pub model: QuantMlp,
    /// Float parameters that quantize to `model`.
    pub shadow: FloatMlp,
    pub train_accuracy: f64,
    /// Best accuracy stayed below chance level (`1 / n_outputs`).
    pub collapsed: bool,
}

/// Power-of-two quantization plus QRelu, retrained with the circuit in the
/// loop. QRelu truncations are re-profiled at the start of every epoch. The
/// returned model is the one with the best bit-exact train accuracy.
pub fn qat_retrain(m: &FloatMlp, train: &QuantizedDataset, cfg: &QatConfig) -> Result<QatOutcome> {
    m.validate()?;
    check_data(m.topology, train.n_features(), &train.labels)?;
    let s = f64::from(train.max_value());
    let xs: Vec<Vec<f64>> = train
        .features
        .iter()
        .map(|r| r.iter().map(|&v| f64::from(v) / s).collect())
        .collect();
    let mut params = m.clone();
    let mut rng = rng::stream(cfg.seed, &[QAT_SHUFFLE_STREAM]);
    let mut best: Option<(f64, QuantMlp, FloatMlp)> = None;
    for epoch in 0..=cfg.epochs {
        let hidden = QuantLayer {
            weights: map_matrix(&params.hidden.weights, |_, w| Po2Weight::quantize(w, cfg.exponents)),
            biases: params
                .hidden
                .biases
                .iter()
                .map(|&b| Po2Weight::quantize(b * s, cfg.exponents))
                .collect(),
        };
        let qrelu = fit_qrelu(&hidden, train, cfg.qrelu_bits, cfg.qrelu_percentile);
        let ctx = QuantContext::new(train.input_bits, &qrelu, cfg.exponents);
        let qm = ctx.quantize(&params, train.input_bits);
        let acc = infer::accuracy_exact(&qm, train)?;
        if best.as_ref().is_none_or(|b| acc > b.0) {
            best = Some((acc, qm, params.clone()));
        }
        if epoch == cfg.epochs {
            break;
        }
        run_epoch(
            &mut params,
            Quantizers::Enabled(&ctx),
            &xs,
            &train.labels,
            cfg.batch_size,
            cfg.learning_rate,
            &mut rng,
            epoch,
        )?;
    }
    let (train_accuracy, model, shadow) = best.expect("epoch 0 always evaluates");
    Ok(QatOutcome {
        collapsed: train_accuracy < 1.0 / m.topology.n_outputs as f64,
        model,
        shadow,
        train_accuracy,
    })
}

/// Predicted class of the quantized forward pass (float arithmetic).
pub fn predict_quantized(m: &FloatMlp, ctx: &QuantContext, x: &[f64]) -> usize {
    use super::argmax_f64;
    let eff = Effective::new(m, Quantizers::Enabled(ctx));
    argmax_f64(&forward(&eff, Quantizers::Enabled(ctx), x).logits)
}
