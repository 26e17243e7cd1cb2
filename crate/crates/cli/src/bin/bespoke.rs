use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use bespoke::artifacts::{self, PlannedPoint};
use bespoke::config::{parse_topology, RunConfig};
use bespoke::pipeline::{self, Timings};
use bespoke::report;
use bespoke_core::adder_tree::build_layout;
use bespoke_core::infer::accuracy_exact;
use bespoke_core::mlp::{FloatMlp, QuantMlp};
use bespoke_core::nsga2::Nsga2Result;
use clap::{Args, Parser, Subcommand};

/// Turns a tabular dataset into approximate bespoke MLP circuits.
#[derive(Parser)]
#[command(name = "bespoke", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the float baseline.
    Train(Flags),
    /// Power-of-two quantization and retraining with QRelu.
    Quantize(Flags),
    /// Genetic search over summand bits.
    Optimize(Flags),
    /// Fit an argmax plan for every selected front point.
    Argmax(Flags),
    /// Emit, verify and assess the designs; write the manifest and report.
    Emit(Flags),
    /// Every stage in one go.
    Run(Flags),
    /// Rebuild report.csv from a saved manifest and print a summary.
    Report(Flags),
}

#[derive(Args, Clone)]
struct Flags {
    /// JSON config; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV path or bundled dataset name.
    #[arg(long)]
    dataset: Option<String>,
    #[arg(long)]
    label_col: Option<usize>,
    /// Hidden-layer topology as inputs,hidden,outputs.
    #[arg(long, value_parser = parse_topology)]
    topology: Option<[usize; 3]>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    population: Option<usize>,
    #[arg(long)]
    generations: Option<usize>,
    /// Largest train-accuracy loss the search accepts.
    #[arg(long)]
    acc_bound: Option<f64>,
    #[arg(long)]
    input_bits: Option<u32>,
    #[arg(long)]
    weight_bits: Option<u32>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    max_front_points: Option<usize>,
    /// Directory holding the bundled datasets.
    #[arg(long, default_value = "data")]
    data_dir: PathBuf,
}

impl Flags {
    fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::from_file(p)?,
            None => RunConfig::default(),
        };
        if let Some(v) = &self.dataset {
            c.dataset = v.clone();
        }
        if self.label_col.is_some() {
            c.label_col = self.label_col;
        }
        if self.topology.is_some() {
            c.topology = self.topology;
        }
        if self.max_front_points.is_some() {
            c.max_front_points = self.max_front_points;
        }
        macro_rules! take {
            ($($f:ident),*) => {$(if let Some(v) = self.$f.clone() { c.$f = v; })*};
        }
        take!(
            seed,
            population,
            generations,
            acc_bound,
            input_bits,
            weight_bits,
            out_dir
        );
        Ok(c)
    }
}

fn out(cfg: &RunConfig, name: &str) -> PathBuf {
    cfg.out_dir.join(name)
}

fn create_out(cfg: &RunConfig) -> Result<()> {
    std::fs::create_dir_all(&cfg.out_dir).with_context(|| format!("creating {}", cfg.out_dir.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Train(f) => train(&f.resolve()?, &f.data_dir),
        Command::Quantize(f) => quantize(&f.resolve()?, &f.data_dir),
        Command::Optimize(f) => optimize(&f.resolve()?, &f.data_dir),
        Command::Argmax(f) => argmax(&f.resolve()?, &f.data_dir),
        Command::Emit(f) => emit(&f.resolve()?, &f.data_dir),
        Command::Run(f) => run(&f.resolve()?, &f.data_dir),
        Command::Report(f) => report(&f.resolve()?),
    }
}

fn train(cfg: &RunConfig, data: &Path) -> Result<()> {
    let p = pipeline::load_and_prepare(cfg, data)?;
    create_out(cfg)?;
    let m = pipeline::train_stage(cfg, &p)?;
    let acc = bespoke_core::mlp::accuracy_float(&m, &p.train.normalized);
    artifacts::write_json(&out(cfg, artifacts::FLOAT_MODEL), &m)?;
    log::info!("float train accuracy {acc:.4}");
    Ok(())
}

fn quantize(cfg: &RunConfig, data: &Path) -> Result<()> {
    let p = pipeline::load_and_prepare(cfg, data)?;
    let float: FloatMlp = artifacts::read_json(&out(cfg, artifacts::FLOAT_MODEL))?;
    let q = pipeline::quantize_stage(cfg, &p, &float)?;
    artifacts::write_json(&out(cfg, artifacts::QUANT_MODEL), &q.model)?;
    log::info!("quantized train accuracy {:.4}", q.train_accuracy);
    Ok(())
}

const SEARCH: &str = "search.json";

fn optimize(cfg: &RunConfig, data: &Path) -> Result<()> {
    let p = pipeline::load_and_prepare(cfg, data)?;
    let m: QuantMlp = artifacts::read_json(&out(cfg, artifacts::QUANT_MODEL))?;
    let (_, res) = pipeline::optimize_stage(cfg, &m, &p.train)?;
    artifacts::write_front(&out(cfg, artifacts::FRONT), &pipeline::front_lines(&res))?;
    artifacts::write_json(&out(cfg, SEARCH), &res)?;
    log::info!(
        "{} front points from {} evaluations, all-keep area {} FA",
        res.front.len(),
        res.evaluations,
        res.baseline_area
    );
    Ok(())
}

fn argmax(cfg: &RunConfig, data: &Path) -> Result<()> {
    let p = pipeline::load_and_prepare(cfg, data)?;
    let m: QuantMlp = artifacts::read_json(&out(cfg, artifacts::QUANT_MODEL))?;
    let res: Nsga2Result = artifacts::read_json(&out(cfg, SEARCH))?;
    let layout = build_layout(&m);
    let planned = pipeline::argmax_stage(cfg, &m, &layout, &p.train, &res.front)?;
    artifacts::write_json(&out(cfg, artifacts::PLANS), &planned)?;
    log::info!("{} plans written", planned.len());
    Ok(())
}

fn emit(cfg: &RunConfig, data: &Path) -> Result<()> {
    let p = pipeline::load_and_prepare(cfg, data)?;
    let float: FloatMlp = artifacts::read_json(&out(cfg, artifacts::FLOAT_MODEL))?;
    let m: QuantMlp = artifacts::read_json(&out(cfg, artifacts::QUANT_MODEL))?;
    let res: Nsga2Result = artifacts::read_json(&out(cfg, SEARCH))?;
    let planned: Vec<PlannedPoint> = artifacts::read_json(&out(cfg, artifacts::PLANS))?;
    let layout = build_layout(&m);
    let built = pipeline::emit_stage(cfg, &p.id, &m, &layout, &planned, &cfg.out_dir)?;
    let assessed = pipeline::assess(&p.held_out, &float, &m, &layout, &built)?;
    let manifest = pipeline::build_manifest(cfg, &p, &float, &m, &res, built, &assessed)?;
    pipeline::write_outputs(&cfg.out_dir, &manifest)?;
    log::info!(
        "exact design train accuracy {:.4}",
        accuracy_exact(&m, &p.train.quantized)?
    );
    print!("{}", report::summary_text(&manifest, None));
    Ok(())
}

fn run(cfg: &RunConfig, data: &Path) -> Result<()> {
    let outcome = pipeline::run_pipeline(cfg, data)?;
    print!("{}", report::summary_text(&outcome.manifest, Some(&outcome.timings)));
    Ok(())
}

fn report(cfg: &RunConfig) -> Result<()> {
    let manifest: pipeline::Manifest = artifacts::read_json(&out(cfg, artifacts::MANIFEST))?;
    let timings: Option<Timings> = artifacts::read_json(&out(cfg, artifacts::TIMINGS)).ok();
    std::fs::write(out(cfg, artifacts::REPORT), report::report_csv(&manifest))?;
    print!("{}", report::summary_text(&manifest, timings.as_ref()));
    Ok(())
}
