use bespoke_core::dataset::*;
use bespoke_core::Error;

fn toy(n: usize) -> Dataset {
    let features = (0..n).map(|i| vec![i as f64, (n - i) as f64]).collect();
    let labels = (0..n).map(|i| i % 3).collect();
    Dataset::new("toy", features, labels, 3).unwrap()
}

#[test]
fn split_cardinality_and_disjointness() {
    let d = toy(10);
    let (tr, te) = split_train_test(&d, 0.7, 42).unwrap();
    assert_eq!((tr.len(), te.len()), (7, 3));
    let mut all: Vec<u64> = tr.features.iter().chain(&te.features).map(|r| r[0] as u64).collect();
    all.sort_unstable();
    assert_eq!(all, (0..10).collect::<Vec<_>>());
}

#[test]
fn split_is_seed_deterministic() {
    let d = toy(200);
    let a = split_train_test(&d, 0.7, 42).unwrap();
    let b = split_train_test(&d, 0.7, 42).unwrap();
    let c = split_train_test(&d, 0.7, 43).unwrap();
    assert_eq!(a, b);
    assert_ne!(a.0.features, c.0.features);
}

#[test]
fn split_rejects_bad_fraction() {
    let d = toy(10);
    for f in [0.0, 1.0, -0.2, 1.5, f64::NAN] {
        assert!(matches!(split_train_test(&d, f, 1), Err(Error::FractionOutOfRange(_))));
    }
}

#[test]
fn quantize_endpoints_and_midpoint() {
    assert_eq!(quantize_value(0.0, 4), 0);
    assert_eq!(quantize_value(1.0, 4), 15);
    assert_eq!(quantize_value(0.5, 4), 8);
}

#[test]
fn test_values_saturate_after_train_normalization() {
    let train = Dataset::new("t", vec![vec![0.0], vec![10.0]], vec![0, 1], 2).unwrap();
    let test = Dataset::new("t", vec![vec![12.0], vec![-3.0]], vec![0, 1], 2).unwrap();
    let (_, te) = normalize_pair(&train, &test).unwrap();
    let q = quantize_inputs(&te, 4).unwrap();
    assert_eq!(q.features, vec![vec![15], vec![0]]);
}

#[test]
fn quantize_rejects_unnormalized_values() {
    let d = Dataset::new("t", vec![vec![0.5], vec![1.2]], vec![0, 1], 2).unwrap();
    assert_eq!(
        quantize_inputs(&d, 4),
        Err(Error::Unnormalized {
            row: 1,
            column: 0,
            value: 1.2
        })
    );
}

#[test]
fn normalizer_ignores_test_rows() {
    let train = toy(20);
    let n1 = Normalizer::fit(&train).unwrap();
    let (tr, _) = normalize_pair(&train, &toy(5)).unwrap();
    let (tr2, _) = normalize_pair(&train, &toy(50)).unwrap();
    assert_eq!(tr.normalizer.as_ref(), Some(&n1));
    assert_eq!(tr, tr2);
}

#[test]
fn dataset_rejects_ragged_rows() {
    let r = Dataset::new("t", vec![vec![0.0, 1.0], vec![0.0]], vec![0, 0], 1);
    assert!(matches!(r, Err(Error::DimensionMismatch(_))));
}
