use bespoke_core::adder_tree::*;
use bespoke_core::nsga2::*;
use bespoke_core::Error;

fn ind(accuracy: f64, fa_area: u64, violation: f64) -> Individual {
    Individual {
        chromosome: Chromosome::all_keep(0),
        objectives: Objectives { accuracy, fa_area },
        violation,
        rank: 0,
        crowding: 0.0,
    }
}

#[test]
fn more_accurate_and_smaller_dominates() {
    assert!(ind(0.85, 90, 0.0).dominates(&ind(0.80, 100, 0.0)));
    assert!(!ind(0.80, 100, 0.0).dominates(&ind(0.85, 90, 0.0)));
}

#[test]
fn feasible_beats_infeasible() {
    assert!(ind(0.5, 1000, 0.0).dominates(&ind(0.9, 0, 0.01)));
    assert!(ind(0.5, 1000, 0.01).dominates(&ind(0.5, 0, 0.02)));
}

#[test]
fn sort_separates_fronts() {
    let pop = vec![ind(0.9, 10, 0.0), ind(0.8, 5, 0.0), ind(0.7, 20, 0.0), ind(0.1, 0, 0.3)];
    assert_eq!(non_dominated_sort(&pop), vec![vec![0, 1], vec![2], vec![3]]);
}

#[test]
fn init_keep_probability_one_keeps_all() {
    let cfg = GaConfig {
        population_size: 5,
        init_keep_probability: 1.0,
        ..GaConfig::default()
    };
    assert!(init_population(30, &cfg).iter().all(|c| c.kept() == 30));
}

#[test]
fn single_individual_population_is_the_anchor() {
    let cfg = GaConfig {
        population_size: 1,
        init_keep_probability: 0.0,
        ..GaConfig::default()
    };
    assert_eq!(init_population(12, &cfg), vec![Chromosome::all_keep(12)]);
}

#[test]
fn biased_init_concentrates_near_keep_probability() {
    let cfg = GaConfig {
        population_size: 2,
        seed: 7,
        ..GaConfig::default()
    };
    let pop = init_population(10_000, &cfg);
    let frac = pop[1].kept() as f64 / 10_000.0;
    assert!((0.88..=0.92).contains(&frac), "{frac}");
}

#[test]
fn boundary_points_are_infinitely_crowded() {
    let pop = vec![ind(0.9, 10, 0.0), ind(0.8, 5, 0.0), ind(0.85, 7, 0.0)];
    let d = crowding_distance(&pop, &[0, 1, 2]);
    assert!(d[0].is_infinite() && d[1].is_infinite());
    assert!(d[2].is_finite() && d[2] > 0.0);
}

#[test]
fn invalid_probability_is_rejected() {
    let cfg = GaConfig {
        crossover_rate: 1.5,
        ..GaConfig::default()
    };
    assert!(matches!(cfg.validate(), Err(Error::InvalidConfig(_))));
}
