//! NSGA-II over summand-bit chromosomes: maximize train accuracy, minimize
//! the surrogate full-adder count.
//!
//! Constraint domination handles the accuracy-loss bound: feasible
//! individuals beat infeasible ones, infeasible ones are ordered by how far
//! they fall below the bound, and feasible ones by Pareto dominance.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adder_tree::{estimate_area, AdderTreeLayout, Chromosome};
use crate::dataset::QuantizedDataset;
use crate::error::{Error, Result};
use crate::infer::{Evaluator, SummandMask};
use crate::mlp::QuantMlp;
use crate::rng;

const INIT_STREAM: u64 = 0x1417;
const BREED_STREAM: u64 = 0xb4ed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub generations: usize,
    pub init_keep_probability: f64,
    /// Per-gene flip probability; `None` means `1 / genes`.
    pub mutation_rate: Option<f64>,
    pub crossover_rate: f64,
    /// Largest admissible train-accuracy loss, in absolute accuracy units.
    pub accuracy_loss_bound: f64,
    pub seed: u64,
}

impl Default for GaConfig {
    fn default() -> Self {
        GaConfig {
            population_size: 1000,
            generations: 30,
            init_keep_probability: 0.9,
            mutation_rate: None,
            crossover_rate: 0.9,
            accuracy_loss_bound: 0.15,
            seed: 0,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        let prob = |name: &str, p: f64| {
            if (0.0..=1.0).contains(&p) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(alloc::format!(
                    "{name} = {p} is not a probability"
                )))
            }
        };
        prob("init_keep_probability", self.init_keep_probability)?;
        prob("crossover_rate", self.crossover_rate)?;
        prob("accuracy_loss_bound", self.accuracy_loss_bound)?;
        if let Some(m) = self.mutation_rate {
            prob("mutation_rate", m)?;
        }
        if self.population_size == 0 {
            return Err(Error::InvalidConfig("population_size must be positive".into()));
        }
        Ok(())
    }

    fn mutation_for(&self, genes: usize) -> f64 {
        self.mutation_rate.unwrap_or(1.0 / genes.max(1) as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Objectives {
    pub accuracy: f64,
    pub fa_area: u64,
}

impl Objectives {
    /// Pareto dominance: no worse in both, strictly better in one.
    pub fn dominates(&self, o: &Objectives) -> bool {
        self.accuracy >= o.accuracy
            && self.fa_area <= o.fa_area
            && (self.accuracy > o.accuracy || self.fa_area < o.fa_area)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Individual {
    pub chromosome: Chromosome,
    pub objectives: Objectives,
    /// Accuracy shortfall below `baseline - bound`; zero when feasible.
    pub violation: f64,
    pub rank: usize,
    /// Boundary points carry infinity, stored as `null` in JSON.
    #[serde(with = "infinite_as_null")]
    pub crowding: f64,
}

mod infinite_as_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Individual {
    pub fn feasible(&self) -> bool {
        self.violation == 0.0
    }

    /// Constraint domination.
    pub fn dominates(&self, o: &Individual) -> bool {
        match (self.feasible(), o.feasible()) {
            (true, false) => true,
            (false, true) => false,
            (false, false) => self.violation < o.violation,
            (true, true) => self.objectives.dominates(&o.objectives),
        }
    }
}

/// The fixed context every chromosome is scored against.
#[derive(Debug, Clone)]
pub struct Problem<'a> {
    pub model: &'a QuantMlp,
    pub layout: &'a AdderTreeLayout,
    pub train: &'a QuantizedDataset,
    /// All-keep train accuracy.
    pub baseline_accuracy: f64,
    pub accuracy_loss_bound: f64,
}

impl<'a> Problem<'a> {
    pub fn new(
        model: &'a QuantMlp,
        layout: &'a AdderTreeLayout,
        train: &'a QuantizedDataset,
        accuracy_loss_bound: f64,
    ) -> Result<Self> {
        Ok(Problem {
            baseline_accuracy: Evaluator::new(model, None)?.accuracy(train, None)?,
            model,
            layout,
            train,
            accuracy_loss_bound,
        })
    }

    pub fn objectives(&self, c: &Chromosome) -> Result<Objectives> {
        let mask = SummandMask::from_chromosome(self.model, self.layout, c)?;
        Ok(Objectives {
            accuracy: Evaluator::new(self.model, Some(&mask))?.accuracy(self.train, None)?,
            fa_area: estimate_area(self.layout, c)?,
        })
    }

    pub fn evaluate(&self, c: Chromosome) -> Result<Individual> {
        let objectives = self.objectives(&c)?;
        Ok(self.individual(c, objectives))
    }

    fn individual(&self, chromosome: Chromosome, objectives: Objectives) -> Individual {
        let floor = self.baseline_accuracy - self.accuracy_loss_bound;
        // Tolerate rounding in `baseline - bound`.
        let violation = floor - objectives.accuracy;
        Individual {
            chromosome,
            objectives,
            violation: if violation > 1e-12 { violation } else { 0.0 },
            rank: 0,
            crowding: 0.0,
        }
    }
}

/// Biased random chromosomes; the first one keeps every bit.
pub fn init_population(n_genes: usize, cfg: &GaConfig) -> Vec<Chromosome> {
    let mut r = rng::stream(cfg.seed, &[INIT_STREAM]);
    (0..cfg.population_size)
        .map(|i| {
            if i == 0 {
                Chromosome::all_keep(n_genes)
            } else {
                Chromosome {
                    genes: (0..n_genes).map(|_| r.gen_bool(cfg.init_keep_probability)).collect(),
                }
            }
        })
        .collect()
}

/// Fronts of `pop` under constraint domination, best first.
pub fn non_dominated_sort(pop: &[Individual]) -> Vec<Vec<usize>> {
    let n = pop.len();
    let mut dominated_by: Vec<Vec<usize>> = alloc::vec![Vec::new(); n];
    let mut counts = alloc::vec![0usize; n];
    for i in 0..n {
        for j in i + 1..n {
            if pop[i].dominates(&pop[j]) {
                dominated_by[i].push(j);
                counts[j] += 1;
            } else if pop[j].dominates(&pop[i]) {
                dominated_by[j].push(i);
                counts[i] += 1;
            }
        }
    }
    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..n).filter(|&i| counts[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominated_by[i] {
                counts[j] -= 1;
                if counts[j] == 0 {
                    next.push(j);
                }
            }
        }
        next.sort_unstable();
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Crowding distance of each member of `front`, in `front` order.
pub fn crowding_distance(pop: &[Individual], front: &[usize]) -> Vec<f64> {
    let n = front.len();
    let mut dist = alloc::vec![0.0; n];
    if n <= 2 {
        dist.iter_mut().for_each(|d| *d = f64::INFINITY);
        return dist;
    }
    let keys: [&dyn Fn(&Individual) -> f64; 2] = [&|i: &Individual| i.objectives.accuracy, &|i: &Individual| {
        i.objectives.fa_area as f64
    }];
    for key in keys {
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            key(&pop[front[a]])
                .partial_cmp(&key(&pop[front[b]]))
                .unwrap_or(Ordering::Equal)
        });
        let lo = key(&pop[front[order[0]]]);
        let hi = key(&pop[front[order[n - 1]]]);
        dist[order[0]] = f64::INFINITY;
        dist[order[n - 1]] = f64::INFINITY;
        if hi > lo {
            for w in 1..n - 1 {
                let gap = key(&pop[front[order[w + 1]]]) - key(&pop[front[order[w - 1]]]);
                dist[order[w]] += gap / (hi - lo);
            }
        }
    }
    dist
}

fn assign_rank_and_crowding(pop: &mut [Individual]) -> Vec<Vec<usize>> {
    let fronts = non_dominated_sort(pop);
    for (r, front) in fronts.iter().enumerate() {
        let d = crowding_distance(pop, front);
        for (&i, c) in front.iter().zip(d) {
            pop[i].rank = r;
            pop[i].crowding = c;
        }
    }
    fronts
}

/// Lower rank wins, then larger crowding; ties go to `a`.
fn tournament(pop: &[Individual], a: usize, b: usize) -> usize {
    let (x, y) = (&pop[a], &pop[b]);
    if y.rank < x.rank || (y.rank == x.rank && y.crowding > x.crowding) {
        b
    } else {
        a
    }
}

fn breed(pop: &[Individual], cfg: &GaConfig, generation: usize, idx: usize) -> Chromosome {
    let mut r = rng::stream(cfg.seed, &[BREED_STREAM, generation as u64, idx as u64]);
    let n = pop.len();
    let p1 = tournament(pop, r.gen_range(0..n), r.gen_range(0..n));
    let p2 = tournament(pop, r.gen_range(0..n), r.gen_range(0..n));
    let (a, b) = (&pop[p1].chromosome.genes, &pop[p2].chromosome.genes);
    let mut genes = a.clone();
    if r.gen_bool(cfg.crossover_rate) {
        for (g, &o) in genes.iter_mut().zip(b) {
            if r.gen_bool(0.5) {
                *g = o;
            }
        }
    }
    let rate = cfg.mutation_for(genes.len());
    for g in genes.iter_mut() {
        if r.gen_bool(rate) {
            *g = !*g;
        }
    }
    Chromosome { genes }
}

/// Best feasible accuracy and smallest feasible area of one generation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    pub best_feasible_accuracy: Option<f64>,
    pub best_feasible_area: Option<u64>,
}

fn stats(generation: usize, pop: &[Individual]) -> GenerationStats {
    let feasible = pop.iter().filter(|i| i.feasible());
    GenerationStats {
        generation,
        best_feasible_accuracy: feasible
            .clone()
            .map(|i| i.objectives.accuracy)
            .fold(None, |m, a| Some(m.map_or(a, |m: f64| m.max(a)))),
        best_feasible_area: feasible.map(|i| i.objectives.fa_area).min(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Nsga2Result {
    /// Feasible rank-0 individuals, one per distinct objective pair,
    /// ordered by ascending area.
    pub front: Vec<Individual>,
    pub history: Vec<GenerationStats>,
    pub baseline_accuracy: f64,
    /// Surrogate area of the all-keep chromosome.
    pub baseline_area: u64,
    pub evaluations: usize,
}

/// Scores chromosomes not seen before; results are memoized by chromosome.
struct Cache<'p, 'a> {
    problem: &'p Problem<'a>,
    seen: BTreeMap<Chromosome, Objectives>,
}

impl Cache<'_, '_> {
    fn evaluate_all(&mut self, cs: Vec<Chromosome>) -> Result<Vec<Individual>> {
        let mut fresh: Vec<Chromosome> = cs.iter().filter(|c| !self.seen.contains_key(c)).cloned().collect();
        fresh.sort();
        fresh.dedup();
        let scored = self.score(&fresh)?;
        for (c, o) in fresh.into_iter().zip(scored) {
            self.seen.insert(c, o);
        }
        Ok(cs
            .into_iter()
            .map(|c| {
                let o = self.seen[&c];
                self.problem.individual(c, o)
            })
            .collect())
    }

    #[cfg(feature = "parallel")]
    fn score(&self, cs: &[Chromosome]) -> Result<Vec<Objectives>> {
        use rayon::prelude::*;
        cs.par_iter().map(|c| self.problem.objectives(c)).collect()
    }

    #[cfg(not(feature = "parallel"))]
    fn score(&self, cs: &[Chromosome]) -> Result<Vec<Objectives>> {
        cs.iter().map(|c| self.problem.objectives(c)).collect()
    }
}

fn select(mut union: Vec<Individual>, n: usize) -> Vec<Individual> {
    let fronts = assign_rank_and_crowding(&mut union);
    let mut keep = Vec::with_capacity(n);
    for front in fronts {
        if keep.len() + front.len() <= n {
            keep.extend(front);
            continue;
        }
        let mut rest = front;
        rest.sort_by(|&a, &b| {
            union[b]
                .crowding
                .partial_cmp(&union[a].crowding)
                .unwrap_or(Ordering::Equal)
                .then(a.cmp(&b))
        });
        keep.extend(rest.into_iter().take(n - keep.len()));
        break;
    }
    keep.sort_unstable();
    let mut slots: Vec<Option<Individual>> = union.into_iter().map(Some).collect();
    let mut next: Vec<Individual> = keep.into_iter().map(|i| slots[i].take().unwrap()).collect();
    assign_rank_and_crowding(&mut next);
    next
}

fn final_front(pop: &[Individual]) -> Vec<Individual> {
    let mut front: Vec<Individual> = pop.iter().filter(|i| i.rank == 0 && i.feasible()).cloned().collect();
    front.sort_by(|a, b| {
        a.objectives
            .fa_area
            .cmp(&b.objectives.fa_area)
            .then(
                b.objectives
                    .accuracy
                    .partial_cmp(&a.objectives.accuracy)
                    .unwrap_or(Ordering::Equal),
            )
            .then(a.chromosome.cmp(&b.chromosome))
    });
    front.dedup_by(|b, a| a.objectives == b.objectives);
    front
}

pub fn nsga2_run(
    m: &QuantMlp,
    layout: &AdderTreeLayout,
    train: &QuantizedDataset,
    cfg: &GaConfig,
) -> Result<Nsga2Result> {
    cfg.validate()?;
    let problem = Problem::new(m, layout, train, cfg.accuracy_loss_bound)?;
    let n_genes = layout.n_genes();
    let mut cache = Cache {
        problem: &problem,
        seen: BTreeMap::new(),
    };
    let mut pop = cache.evaluate_all(init_population(n_genes, cfg))?;
    assign_rank_and_crowding(&mut pop);
    let mut history = alloc::vec![stats(0, &pop)];
    for g in 0..cfg.generations {
        let children: Vec<Chromosome> = (0..cfg.population_size).map(|i| breed(&pop, cfg, g, i)).collect();
        let offspring = cache.evaluate_all(children)?;
        let mut union = pop;
        union.extend(offspring);
        pop = select(union, cfg.population_size);
        history.push(stats(g + 1, &pop));
    }
    Ok(Nsga2Result {
        front: final_front(&pop),
        history,
        baseline_accuracy: problem.baseline_accuracy,
        baseline_area: estimate_area(layout, &Chromosome::all_keep(n_genes))?,
        evaluations: cache.seen.len(),
    })
}
