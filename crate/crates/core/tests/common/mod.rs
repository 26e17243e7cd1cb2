#![allow(dead_code)]

pub mod verilog_eval;

use bespoke_core::adder_tree::{AdderTreeLayout, Chromosome};
use bespoke_core::dataset::QuantizedDataset;
use bespoke_core::mlp::{Po2Weight, QReluConfig, QuantLayer, QuantMlp, Topology};
use bespoke_core::rng::{self, StreamRng};
use rand::Rng;

pub fn rng(seed: u64) -> StreamRng {
    rng::stream(seed, &[0x7e57])
}

fn random_po2(r: &mut StreamRng, lo: i8, hi: i8, zero_p: f64) -> Po2Weight {
    if r.gen_bool(zero_p) {
        Po2Weight::ZERO
    } else {
        Po2Weight::new(if r.gen_bool(0.5) { 1 } else { -1 }, r.gen_range(lo..=hi))
    }
}

/// Random circuit model with small exponents.
pub fn random_model(r: &mut StreamRng, t: Topology, input_bits: u32, qrelu_bits: u32) -> QuantMlp {
    let layer = |r: &mut StreamRng, n_in: usize, n_out: usize, blo: i8, bhi: i8| QuantLayer {
        weights: (0..n_out)
            .map(|_| (0..n_in).map(|_| random_po2(r, -3, 2, 0.15)).collect())
            .collect(),
        biases: (0..n_out).map(|_| random_po2(r, blo, bhi, 0.3)).collect(),
    };
    let hidden = layer(r, t.n_inputs, t.n_hidden, -1, input_bits as i8 + 1);
    let output = layer(r, t.n_hidden, t.n_outputs, -1, qrelu_bits as i8);
    QuantMlp {
        topology: t,
        input_bits,
        qrelu: QReluConfig {
            out_bits: qrelu_bits,
            truncate_lsb: (0..t.n_hidden).map(|_| r.gen_range(0..3)).collect(),
        },
        layers: vec![hidden, output],
    }
}

pub fn random_inputs(r: &mut StreamRng, n: usize, n_features: usize, bits: u32) -> Vec<Vec<u32>> {
    (0..n)
        .map(|_| (0..n_features).map(|_| r.gen_range(0..1u32 << bits)).collect())
        .collect()
}

pub fn random_dataset(r: &mut StreamRng, n: usize, n_features: usize, bits: u32, n_classes: usize) -> QuantizedDataset {
    QuantizedDataset {
        input_bits: bits,
        features: random_inputs(r, n, n_features, bits),
        labels: (0..n).map(|_| r.gen_range(0..n_classes)).collect(),
    }
}

pub fn random_chromosome(r: &mut StreamRng, layout: &AdderTreeLayout, keep: f64) -> Chromosome {
    Chromosome {
        genes: (0..layout.n_genes()).map(|_| r.gen_bool(keep)).collect(),
    }
}

/// Every vector of `n` values of `bits` bits.
pub fn all_inputs(n: usize, bits: u32) -> Vec<Vec<u32>> {
    let total = 1u64 << (n as u32 * bits);
    (0..total)
        .map(|v| {
            (0..n)
                .map(|i| ((v >> (i as u32 * bits)) & ((1 << bits) - 1)) as u32)
                .collect()
        })
        .collect()
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].partial_cmp(&v[j]).unwrap());
        let mut r = vec![0.0; v.len()];
        let mut i = 0;
        while i < idx.len() {
            let mut j = i;
            while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
                j += 1;
            }
            let avg = (i + j) as f64 / 2.0;
            for &k in &idx[i..=j] {
                r[k] = avg;
            }
            i = j + 1;
        }
        r
    }
    let (ra, rb) = (ranks(a), ranks(b));
    let n = a.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    if va == 0.0 || vb == 0.0 {
        return 0.0;
    }
    cov / (va * vb).sqrt()
}

/// Random model with QRelu width drawn from 3..=8.
pub fn any_model(r: &mut StreamRng, t: Topology, input_bits: u32) -> QuantMlp {
    let q = r.gen_range(3..=8);
    random_model(r, t, input_bits, q)
}

/// Balanced bracket with random operand order and random kept bits.
pub fn thinned_plan(r: &mut StreamRng, n: usize, width: u32, keep: f64) -> bespoke_core::argmax::ArgmaxPlan {
    let mut plan = bespoke_core::argmax::ArgmaxPlan::full_width(n, width);
    for stage in plan.stages.iter_mut() {
        for c in stage.iter_mut() {
            if r.gen_bool(0.5) {
                std::mem::swap(&mut c.a, &mut c.b);
            }
            c.kept_bits.retain(|_| r.gen_bool(keep));
        }
    }
    plan
}
