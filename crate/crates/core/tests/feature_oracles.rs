mod common;

use edtr_core::geometry::{self, PointCloud};
use edtr_core::topo::{self, FeatureWeights};
use edtr_oracle as oracle;
use rand::Rng;

#[test]
fn features_match_brute_force_on_random_clouds() {
    let mut rng = common::rng(2024);
    let weights = FeatureWeights::default();
    for case in 0..200 {
        let k = rng.random_range(2..=8);
        let d = rng.random_range(2..=32);
        let pts = common::random_cloud(&mut rng, k, d);
        let cloud = PointCloud::from_rows(&pts).unwrap();
        let got = topo::topo_profile(&cloud, &weights, 7).unwrap().features.to_array();
        let want = oracle::features(&pts);
        for f in 0..8 {
            assert!(
                (got[f] - want[f]).abs() <= 1e-9,
                "case {case} k={k} d={d} {}: {} vs {}",
                topo::FEATURE_NAMES[f],
                got[f],
                want[f]
            );
        }
    }
}

#[test]
fn distance_summary_matches_brute_force() {
    let mut rng = common::rng(5);
    for _ in 0..100 {
        let k = rng.random_range(2..=16);
        let d = rng.random_range(1..=32);
        let pts = common::random_cloud(&mut rng, k, d);
        let s = geometry::distance_summary(&PointCloud::from_rows(&pts).unwrap());
        let rel = |a: f64, b: f64| (a - b).abs() <= 1e-12 * b.abs().max(1.0);
        for (a, b) in s.pairwise.iter().zip(oracle::pairwise(&pts)) {
            assert!(rel(*a, b));
        }
        for (a, b) in s.radii.iter().zip(oracle::radii(&pts)) {
            assert!(rel(*a, b));
        }
        assert!(rel(s.mean, oracle::mean(&oracle::pairwise(&pts))));
        assert!(rel(s.std, oracle::spread(&pts)));
    }
}

#[test]
fn silhouette_matches_textbook_definition() {
    let mut rng = common::rng(11);
    for _ in 0..100 {
        let k = rng.random_range(3..=10);
        let pts = common::random_cloud(&mut rng, k, 4);
        let groups = rng.random_range(2..=k.min(4));
        let mut labels: Vec<usize> = (0..k).map(|i| if i < groups { i } else { rng.random_range(0..groups) }).collect();
        labels.rotate_left(rng.random_range(0..k));
        let assignment = geometry::ClusterAssignment::from_labels(labels.iter().map(|&l| l as i32).collect());
        let got = geometry::silhouette(&PointCloud::from_rows(&pts).unwrap(), &assignment).unwrap();
        assert!((got - oracle::silhouette(&pts, &labels)).abs() < 1e-12);
    }
}

#[test]
fn exact_kmeans_matches_exhaustive_search_and_bounds_lloyd() {
    let mut rng = common::rng(99);
    for _ in 0..60 {
        let k = rng.random_range(3..=8);
        let d = rng.random_range(1..=8);
        let pts = common::random_cloud(&mut rng, k, d);
        let cloud = PointCloud::from_rows(&pts).unwrap();
        for g in 2..=k.min(5) {
            let exact = geometry::exact_kmeans(&cloud, g).unwrap();
            let (labels, best) = oracle::exhaustive_kmeans(&pts, g);
            assert!((exact.inertia - best).abs() <= 1e-9 * best.max(1.0), "{} vs {}", exact.inertia, best);
            let want: Vec<i32> = labels.iter().map(|&l| l as i32).collect();
            assert_eq!(exact.assignment.labels, want);
            let lloyd = geometry::kmeans(&cloud, g, 3, 300).unwrap();
            assert!(lloyd.inertia >= exact.inertia - 1e-9);
        }
    }
}

#[test]
fn two_tight_pairs_split_as_expected() {
    let pts = vec![vec![0.0, 0.0], vec![0.1, 0.0], vec![10.0, 0.0], vec![10.1, 0.0]];
    let cloud = PointCloud::from_rows(&pts).unwrap();
    let fit = geometry::kmeans(&cloud, 2, 1, 100).unwrap();
    assert_eq!(fit.assignment.labels, vec![0, 0, 1, 1]);
    let (labels, _) = oracle::exhaustive_kmeans(&pts, 2);
    assert_eq!(labels, vec![0, 0, 1, 1]);
    assert!(geometry::silhouette(&cloud, &fit.assignment).unwrap() > 0.95);
}

