//! Files written to and read from the output directory.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use bespoke_core::adder_tree::Chromosome;
use bespoke_core::argmax::ArgmaxPlan;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const FLOAT_MODEL: &str = "float_model.json";
pub const QUANT_MODEL: &str = "quant_model.json";
pub const FRONT: &str = "front.jsonl";
pub const PLANS: &str = "plans.json";
pub const MANIFEST: &str = "manifest.json";
pub const TIMINGS: &str = "timings.json";
pub const REPORT: &str = "report.csv";
pub const DESIGNS: &str = "designs";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Chromosome as a string of `0`/`1`, gene 0 first.
pub fn genes_to_string(c: &Chromosome) -> String {
    c.genes.iter().map(|&g| if g { '1' } else { '0' }).collect()
}

pub fn genes_from_string(s: &str) -> Result<Chromosome> {
    let genes = s
        .chars()
        .map(|ch| match ch {
            '1' => Ok(true),
            '0' => Ok(false),
            other => bail!("invalid gene {other:?}"),
        })
        .collect::<Result<_>>()?;
    Ok(Chromosome { genes })
}

/// One line of `front.jsonl`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrontLine {
    pub chromosome: String,
    pub train_accuracy: f64,
    pub fa_area: u64,
}

pub fn write_front(path: &Path, front: &[FrontLine]) -> Result<()> {
    let mut out = Vec::new();
    for line in front {
        serde_json::to_writer(&mut out, line)?;
        out.push(b'\n');
    }
    fs::File::create(path)
        .and_then(|mut f| f.write_all(&out))
        .with_context(|| format!("writing {}", path.display()))
}

pub fn read_front(path: &Path) -> Result<Vec<FrontLine>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, l)| serde_json::from_str(l).with_context(|| format!("{} line {}", path.display(), i + 1)))
        .collect()
}

/// A chromosome with its fitted argmax plan, as stored in `plans.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedPoint {
    pub id: String,
    pub chromosome: String,
    pub fa_estimate: u64,
    /// GA objective: train accuracy with exact argmax.
    pub masked_train_accuracy: f64,
    /// Train accuracy with the plan applied.
    pub train_accuracy: f64,
    pub plan: ArgmaxPlan,
}

pub fn designs_dir(out_dir: &Path) -> PathBuf {
    out_dir.join(DESIGNS)
}
