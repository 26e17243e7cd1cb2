//! The end-to-end flow: load, split, normalize, quantize inputs, train,
//! retrain with quantizers in the loop, search summand masks, fit argmax
//! plans, emit and verify designs, assess on the test set, filter.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{anyhow, ensure, Context};
use bespoke_core::adder_tree::{build_layout, estimate_area, AdderTreeLayout, Chromosome};
use bespoke_core::argmax::{build_plan_from_values, ArgmaxPlan, PlanData};
use bespoke_core::hdl::{
    build_netlist, chromosome_hash, emit_verilog, model_hash, plan_hash, settle_plan, EmitConfig, Provenance,
};
use bespoke_core::infer::{accuracy_exact, output_width, Evaluator, SummandMask};
use bespoke_core::mlp::{accuracy_float, qat_retrain, train_float, FloatMlp, QatOutcome, QuantMlp, Topology};
use bespoke_core::nsga2::{nsga2_run, GenerationStats, Individual, Nsga2Result};
use bespoke_core::rng;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, FrontLine, PlannedPoint};
use crate::config::RunConfig;
use crate::csv_input::{load_csv, CsvSpec};
use crate::hygiene::{prepare, HeldOut, TrainSplit};
use crate::pareto::{pareto_filter, ParetoPoint};
use crate::report;

const VERIFY_STREAM: u64 = 0xe9c1;
/// Input spaces up to this many bits are checked exhaustively.
const EXHAUSTIVE_BITS: u32 = 14;
/// Accuracy loss under which a front point counts as near-lossless.
pub const NEAR_LOSSLESS: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Load,
    Split,
    Train,
    Quantize,
    Optimize,
    Argmax,
    Emit,
    Verify,
    Assess,
    Write,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Load => "load",
            Stage::Split => "split",
            Stage::Train => "train",
            Stage::Quantize => "quantize",
            Stage::Optimize => "optimize",
            Stage::Argmax => "argmax",
            Stage::Emit => "emit",
            Stage::Verify => "verify",
            Stage::Assess => "assess",
            Stage::Write => "write",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("stage `{stage}` failed: {source:#}")]
pub struct StageError {
    pub stage: Stage,
    #[source]
    pub source: anyhow::Error,
}

pub type StageResult<T> = Result<T, StageError>;

trait AtStage<T> {
    fn at(self, stage: Stage) -> StageResult<T>;
}

impl<T, E: Into<anyhow::Error>> AtStage<T> for Result<T, E> {
    fn at(self, stage: Stage) -> StageResult<T> {
        self.map_err(|e| StageError {
            stage,
            source: e.into(),
        })
    }
}

/// Wall-clock seconds per stage, kept apart from the manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Timings {
    pub stages: Vec<(String, f64)>,
}

impl Timings {
    fn time<T>(&mut self, stage: Stage, f: impl FnOnce() -> StageResult<T>) -> StageResult<T> {
        let start = Instant::now();
        let out = f();
        self.stages.push((stage.to_string(), start.elapsed().as_secs_f64()));
        out
    }

    pub fn total(&self) -> f64 {
        self.stages.iter().map(|s| s.1).sum()
    }
}

/// Loaded, split and quantized data.
#[derive(Debug)]
pub struct Prepared {
    pub id: String,
    pub path: String,
    pub classes: Vec<String>,
    pub topology: Topology,
    pub rows: usize,
    pub train: TrainSplit,
    pub held_out: HeldOut,
}

pub fn load_and_prepare(cfg: &RunConfig, data_dir: &Path) -> StageResult<Prepared> {
    cfg.validate(data_dir).at(Stage::Config)?;
    let path = cfg.dataset_path(data_dir);
    let topology = cfg.resolved_topology().at(Stage::Config)?;
    let spec = CsvSpec {
        label_column: cfg.label_col,
        has_header: None,
    };
    let (data, classes) = load_csv(&path, &spec).at(Stage::Load)?;
    if data.n_features() != topology.n_inputs || classes.len() != topology.n_outputs {
        return Err(anyhow!(
            "{} has {} features and {} classes, topology expects {} and {}",
            path.display(),
            data.n_features(),
            classes.len(),
            topology.n_inputs,
            topology.n_outputs
        ))
        .at(Stage::Load);
    }
    let (train, held_out) = prepare(&data, cfg.train_fraction, cfg.seed, cfg.input_bits).at(Stage::Split)?;
    Ok(Prepared {
        id: cfg.dataset_id(),
        path: path.display().to_string(),
        classes,
        topology,
        rows: data.len(),
        train,
        held_out,
    })
}

pub fn train_stage(cfg: &RunConfig, p: &Prepared) -> StageResult<FloatMlp> {
    train_float(&p.train.normalized, p.topology, &cfg.train()).at(Stage::Train)
}

pub fn quantize_stage(cfg: &RunConfig, p: &Prepared, float: &FloatMlp) -> StageResult<QatOutcome> {
    let out = qat_retrain(float, &p.train.quantized, &cfg.qat()).at(Stage::Quantize)?;
    if out.collapsed {
        log::warn!(
            "quantized train accuracy {:.3} is below chance level after retraining",
            out.train_accuracy
        );
    }
    Ok(out)
}

pub fn optimize_stage(
    cfg: &RunConfig,
    m: &QuantMlp,
    train: &TrainSplit,
) -> StageResult<(AdderTreeLayout, Nsga2Result)> {
    let layout = build_layout(m);
    let res = nsga2_run(m, &layout, &train.quantized, &cfg.ga()).at(Stage::Optimize)?;
    Ok((layout, res))
}

pub fn front_lines(res: &Nsga2Result) -> Vec<FrontLine> {
    res.front
        .iter()
        .map(|i| FrontLine {
            chromosome: artifacts::genes_to_string(&i.chromosome),
            train_accuracy: i.objectives.accuracy,
            fa_area: i.objectives.fa_area,
        })
        .collect()
}

/// At most `max` points spread evenly over the front, both ends included.
pub fn thin_front<T: Clone>(front: &[T], max: Option<usize>) -> Vec<T> {
    match max {
        Some(k) if front.len() > k => {
            if k == 1 {
                return vec![front[front.len() - 1].clone()];
            }
            let mut idx: Vec<usize> = (0..k).map(|i| i * (front.len() - 1) / (k - 1)).collect();
            idx.dedup();
            idx.into_iter().map(|i| front[i].clone()).collect()
        }
        _ => front.to_vec(),
    }
}

/// Fits an argmax plan for a chromosome and settles it so that it never
/// costs more gates than exact argmax.
pub fn plan_point(
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    train: &TrainSplit,
    c: &Chromosome,
    guard: f64,
) -> anyhow::Result<(ArgmaxPlan, f64, f64)> {
    let mask = SummandMask::from_chromosome(m, layout, c)?;
    let ev = Evaluator::new(m, Some(&mask))?;
    let values = ev.output_matrix(&train.quantized);
    let data = PlanData {
        values: &values,
        labels: &train.quantized.labels,
        width: output_width(m),
        guard,
    };
    let fitted = build_plan_from_values(&data, m.topology.n_outputs)?;
    let plan = settle_plan(m, layout, c, &fitted)?;
    plan.validate()?;
    let masked = ev.accuracy(&train.quantized, None)?;
    let with_plan = ev.accuracy(&train.quantized, Some(&plan))?;
    Ok((plan, masked, with_plan))
}

/// The exact design followed by one plan per selected front point.
pub fn argmax_stage(
    cfg: &RunConfig,
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    train: &TrainSplit,
    front: &[Individual],
) -> StageResult<Vec<PlannedPoint>> {
    let n_genes = layout.n_genes();
    let all_keep = Chromosome::all_keep(n_genes);
    let exact_plan = ArgmaxPlan::full_width(m.topology.n_outputs, output_width(m));
    let ev = Evaluator::new(m, None).at(Stage::Argmax)?;
    let exact_acc = ev.accuracy(&train.quantized, None).at(Stage::Argmax)?;
    let mut points = vec![PlannedPoint {
        id: "exact".into(),
        chromosome: artifacts::genes_to_string(&all_keep),
        fa_estimate: estimate_area(layout, &all_keep).at(Stage::Argmax)?,
        masked_train_accuracy: exact_acc,
        train_accuracy: exact_acc,
        plan: exact_plan,
    }];
    for (k, ind) in thin_front(front, cfg.max_front_points).iter().enumerate() {
        let (plan, masked, with_plan) =
            plan_point(m, layout, train, &ind.chromosome, cfg.argmax_guard).at(Stage::Argmax)?;
        points.push(PlannedPoint {
            id: format!("p{k:03}"),
            chromosome: artifacts::genes_to_string(&ind.chromosome),
            fa_estimate: ind.objectives.fa_area,
            masked_train_accuracy: masked,
            train_accuracy: with_plan,
            plan,
        });
    }
    Ok(points)
}

/// Inputs used to check a design: every input vector when the space is
/// small, `n` seeded random vectors otherwise.
pub fn check_inputs(m: &QuantMlp, n: usize, seed: u64, point: usize) -> Vec<Vec<u32>> {
    let nf = m.topology.n_inputs;
    let bits = m.input_bits;
    let total_bits = nf as u32 * bits;
    if total_bits <= EXHAUSTIVE_BITS {
        let top = (1u32 << bits) - 1;
        return (0..1u64 << total_bits)
            .map(|v| (0..nf).map(|i| (v >> (i as u32 * bits)) as u32 & top).collect())
            .collect();
    }
    let mut r = rng::stream(seed, &[VERIFY_STREAM, point as u64]);
    (0..n)
        .map(|_| (0..nf).map(|_| r.gen_range(0..1u32 << bits)).collect())
        .collect()
}

/// A design that has been emitted and checked against the model.
#[derive(Debug, Clone)]
pub struct BuiltPoint {
    pub planned: PlannedPoint,
    pub chromosome: Chromosome,
    pub point: ParetoPoint,
}

/// Emits Verilog for every planned point and checks its netlist against
/// the reference model. Designs are written as they are produced.
pub fn emit_stage(
    cfg: &RunConfig,
    id: &str,
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    planned: &[PlannedPoint],
    out_dir: &Path,
) -> StageResult<Vec<BuiltPoint>> {
    let dir = artifacts::designs_dir(out_dir);
    fs::create_dir_all(&dir).at(Stage::Emit)?;
    let mhash = model_hash(m);
    let mut built = Vec::with_capacity(planned.len());
    for (k, p) in planned.iter().enumerate() {
        let c = artifacts::genes_from_string(&p.chromosome).at(Stage::Emit)?;
        let emit = EmitConfig {
            module_name: format!("{id}_{}", p.id),
            include_argmax: true,
            provenance: Provenance {
                model_hash: mhash,
                chromosome_hash: chromosome_hash(&c),
                plan_hash: plan_hash(&p.plan),
                train_accuracy: Some(p.train_accuracy),
                fa_estimate: Some(p.fa_estimate),
            },
        };
        let text = emit_verilog(m, layout, &c, &p.plan, &emit).at(Stage::Emit)?;
        if text.contains('*') {
            return Err(anyhow!("design {} contains a multiplication", p.id)).at(Stage::Emit);
        }
        let file = format!("{}/{}.v", artifacts::DESIGNS, emit.module_name);
        fs::write(out_dir.join(&file), text).at(Stage::Emit)?;
        let netlist = build_netlist(m, layout, &c, Some(&p.plan)).at(Stage::Emit)?;
        let verified = verify(
            m,
            layout,
            &c,
            &p.plan,
            &netlist,
            &check_inputs(m, cfg.check_vectors, cfg.seed, k),
        )
        .with_context(|| format!("design {}", p.id))
        .at(Stage::Verify)?;
        let gates = netlist.gate_count();
        built.push(BuiltPoint {
            point: ParetoPoint {
                id: p.id.clone(),
                chromosome_hash: format!("{:016x}", emit.provenance.chromosome_hash),
                plan_hash: format!("{:016x}", emit.provenance.plan_hash),
                kept_summand_bits: c.kept(),
                train_accuracy: p.train_accuracy,
                test_accuracy: f64::NAN,
                fa_estimate: p.fa_estimate,
                gates,
                netlist_gate_count: gates.weighted(),
                comparator_width_reduction: p.plan.width_reduction(),
                argmax_train_loss: p.masked_train_accuracy - p.train_accuracy,
                n_comparators: p.plan.n_comparators(),
                verified_vectors: verified,
                design: file,
            },
            chromosome: c,
            planned: p.clone(),
        });
    }
    Ok(built)
}

/// Simulates the netlist on `xs` and compares the class index with the
/// reference model. Returns the number of vectors checked.
pub fn verify(
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    c: &Chromosome,
    plan: &ArgmaxPlan,
    netlist: &bespoke_core::hdl::Netlist,
    xs: &[Vec<u32>],
) -> anyhow::Result<usize> {
    netlist.validate()?;
    let mask = SummandMask::from_chromosome(m, layout, c)?;
    let ev = Evaluator::new(m, Some(&mask))?;
    let got = netlist.run_vectors(xs, m.input_bits)?;
    for (x, y) in xs.iter().zip(&got) {
        let want = ev.predict(x, Some(plan));
        ensure!(
            y[0] as usize == want,
            "netlist gives class {} but the model gives {want} for input {x:?}",
            y[0]
        );
    }
    Ok(xs.len())
}

/// Test accuracies, all read in one pass over the held-out set.
#[derive(Debug, Clone, PartialEq)]
pub struct Assessment {
    pub float_test: f64,
    pub quant_test: f64,
    pub points: Vec<f64>,
}

pub fn assess(
    held_out: &HeldOut,
    float: &FloatMlp,
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    built: &[BuiltPoint],
) -> StageResult<Assessment> {
    held_out
        .assess(|normalized, quantized| -> anyhow::Result<Assessment> {
            let mut points = Vec::with_capacity(built.len());
            for b in built {
                let mask = SummandMask::from_chromosome(m, layout, &b.chromosome)?;
                points.push(Evaluator::new(m, Some(&mask))?.accuracy(quantized, Some(&b.planned.plan))?);
            }
            Ok(Assessment {
                float_test: accuracy_float(float, normalized),
                quant_test: Evaluator::new(m, None)?.accuracy(quantized, None)?,
                points,
            })
        })
        .at(Stage::Assess)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetInfo {
    pub id: String,
    pub path: String,
    pub rows: usize,
    pub features: usize,
    pub classes: Vec<String>,
    pub train_rows: usize,
    pub test_rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    pub float_init: u64,
    pub qat: u64,
    pub ga: u64,
    pub verify: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelInfo {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantInfo {
    pub train_accuracy: f64,
    pub test_accuracy: f64,
    pub model_hash: String,
    pub truncate_lsb: Vec<u32>,
    pub collapsed: bool,
    pub summand_bits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchInfo {
    pub baseline_accuracy: f64,
    pub baseline_area: u64,
    pub evaluations: usize,
    pub front_size: usize,
    pub history: Vec<GenerationStats>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    /// Float test accuracy minus quantized test accuracy.
    pub qat_test_drop: f64,
    /// Largest all-keep / FA ratio among front points within
    /// [`NEAR_LOSSLESS`] train accuracy of the baseline.
    pub fa_reduction_near_lossless: f64,
    /// Mean comparator width reduction over the approximate designs.
    pub mean_comparator_width_reduction: f64,
    /// Largest train accuracy loss caused by a plan alone.
    pub max_argmax_train_loss: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub config: RunConfig,
    pub dataset: DatasetInfo,
    pub topology: Topology,
    pub seeds: Seeds,
    pub float_model: ModelInfo,
    pub quantized_model: QuantInfo,
    pub search: SearchInfo,
    /// Every emitted design, the exact one first.
    pub points: Vec<ParetoPoint>,
    /// Ids of the final Pareto set, by ascending gate count.
    pub pareto: Vec<String>,
    pub summary: Summary,
}

pub fn tool_version() -> String {
    format!("{} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION"))
}

/// All-keep area over `fa`; an empty tree counts as one adder.
pub fn fa_reduction(baseline: u64, fa: u64) -> f64 {
    baseline as f64 / fa.max(1) as f64
}

/// Everything a finished run produced.
#[derive(Debug)]
pub struct RunOutcome {
    pub manifest: Manifest,
    pub timings: Timings,
    pub float_model: FloatMlp,
    pub qat: QatOutcome,
    pub search: Nsga2Result,
    pub held_out_reads: usize,
}

/// Runs the whole flow and writes every artifact into `cfg.out_dir`.
pub fn run_pipeline(cfg: &RunConfig, data_dir: &Path) -> StageResult<RunOutcome> {
    let mut t = Timings::default();
    let p = t.time(Stage::Load, || load_and_prepare(cfg, data_dir))?;
    let out = cfg.out_dir.as_path();
    fs::create_dir_all(out).at(Stage::Write)?;
    let float = t.time(Stage::Train, || train_stage(cfg, &p))?;
    artifacts::write_json(&out.join(artifacts::FLOAT_MODEL), &float).at(Stage::Write)?;
    let qat = t.time(Stage::Quantize, || quantize_stage(cfg, &p, &float))?;
    let m = &qat.model;
    artifacts::write_json(&out.join(artifacts::QUANT_MODEL), m).at(Stage::Write)?;
    let (layout, search) = t.time(Stage::Optimize, || optimize_stage(cfg, m, &p.train))?;
    artifacts::write_front(&out.join(artifacts::FRONT), &front_lines(&search)).at(Stage::Write)?;
    let planned = t.time(Stage::Argmax, || argmax_stage(cfg, m, &layout, &p.train, &search.front))?;
    artifacts::write_json(&out.join(artifacts::PLANS), &planned).at(Stage::Write)?;
    let built = t.time(Stage::Emit, || emit_stage(cfg, &p.id, m, &layout, &planned, out))?;
    let assessed = t.time(Stage::Assess, || assess(&p.held_out, &float, m, &layout, &built))?;
    let manifest = t.time(Stage::Write, || {
        let manifest = build_manifest(cfg, &p, &float, m, &search, built, &assessed)?;
        write_outputs(out, &manifest)?;
        Ok(manifest)
    })?;
    artifacts::write_json(&out.join(artifacts::TIMINGS), &t).at(Stage::Write)?;
    Ok(RunOutcome {
        manifest,
        timings: t,
        float_model: float,
        held_out_reads: p.held_out.reads(),
        qat,
        search,
    })
}

pub fn build_manifest(
    cfg: &RunConfig,
    p: &Prepared,
    float: &FloatMlp,
    m: &QuantMlp,
    search: &Nsga2Result,
    built: Vec<BuiltPoint>,
    assessed: &Assessment,
) -> StageResult<Manifest> {
    let quant_train = accuracy_exact(m, &p.train.quantized).at(Stage::Write)?;
    let summand_bits = built.first().map_or(0, |b| b.chromosome.len());
    let points: Vec<ParetoPoint> = built
        .into_iter()
        .zip(&assessed.points)
        .map(|(b, &acc)| ParetoPoint {
            test_accuracy: acc,
            ..b.point
        })
        .collect();
    let pareto = pareto_filter(&points).into_iter().map(|q| q.id).collect();
    let approx: Vec<&ParetoPoint> = points.iter().filter(|q| q.id != "exact").collect();
    let mean_cwr = if approx.is_empty() {
        1.0
    } else {
        approx.iter().map(|q| q.comparator_width_reduction).sum::<f64>() / approx.len() as f64
    };
    let fa_near = search
        .front
        .iter()
        .filter(|i| search.baseline_accuracy - i.objectives.accuracy <= NEAR_LOSSLESS + 1e-12)
        .map(|i| fa_reduction(search.baseline_area, i.objectives.fa_area))
        .fold(1.0, f64::max);
    Ok(Manifest {
        tool: tool_version(),
        config: cfg.clone(),
        dataset: DatasetInfo {
            id: p.id.clone(),
            path: p.path.clone(),
            rows: p.rows,
            features: p.topology.n_inputs,
            classes: p.classes.clone(),
            train_rows: p.train.quantized.len(),
            test_rows: p.held_out.len(),
        },
        topology: p.topology,
        seeds: Seeds {
            split: cfg.seed,
            float_init: cfg.seed,
            qat: cfg.seed,
            ga: cfg.seed,
            verify: cfg.seed,
        },
        float_model: ModelInfo {
            train_accuracy: accuracy_float(float, &p.train.normalized),
            test_accuracy: assessed.float_test,
        },
        quantized_model: QuantInfo {
            train_accuracy: quant_train,
            test_accuracy: assessed.quant_test,
            model_hash: format!("{:016x}", model_hash(m)),
            truncate_lsb: m.qrelu.truncate_lsb.clone(),
            collapsed: quant_train < 1.0 / m.topology.n_outputs as f64,
            summand_bits,
        },
        search: SearchInfo {
            baseline_accuracy: search.baseline_accuracy,
            baseline_area: search.baseline_area,
            evaluations: search.evaluations,
            front_size: search.front.len(),
            history: search.history.clone(),
        },
        summary: Summary {
            qat_test_drop: assessed.float_test - assessed.quant_test,
            fa_reduction_near_lossless: fa_near,
            mean_comparator_width_reduction: mean_cwr,
            max_argmax_train_loss: points.iter().map(|q| q.argmax_train_loss).fold(0.0, f64::max),
        },
        points,
        pareto,
    })
}

pub fn write_outputs(out: &Path, manifest: &Manifest) -> StageResult<()> {
    artifacts::write_json(&out.join(artifacts::MANIFEST), manifest).at(Stage::Write)?;
    fs::write(out.join(artifacts::REPORT), report::report_csv(manifest)).at(Stage::Write)
}
