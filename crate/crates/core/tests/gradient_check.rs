use edtr_core::head::{self, HeadParameters, Target, TrainExample, TrainingSpec};
use edtr_core::TrajectoryStats;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn example(rng: &mut ChaCha8Rng, k: usize, n: usize) -> TrainExample {
    let stats = (0..k)
        .map(|_| TrajectoryStats { variance: rng.random::<f64>() * 0.25, entropy: rng.random::<f64>() * 0.7 })
        .collect();
    let components = rng.random_range(2..=n);
    let target = if rng.random::<bool>() { Target::Class(rng.random_range(0..components)) } else { Target::Uniform };
    TrainExample { stats, components, target }
}

#[test]
fn backprop_matches_central_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let params = HeadParameters::seeded(5, 5, 1000 + case);
        let ex = example(&mut rng, 5, 5);
        let (_, grad) = head::loss_and_gradient(&params, &ex).unwrap();
        let flat = params.to_flat();
        let mut probe = params.clone();
        let coords: Vec<usize> = (0..300).map(|_| rng.random_range(0..flat.len())).collect();
        for &c in &coords {
            let mut plus = flat.clone();
            plus[c] += eps;
            probe.set_flat(&plus).unwrap();
            let lp = head::example_loss(&probe, &ex).unwrap();
            let mut minus = flat.clone();
            minus[c] -= eps;
            probe.set_flat(&minus).unwrap();
            let lm = head::example_loss(&probe, &ex).unwrap();
            let fd = (lp - lm) / (2.0 * eps);
            let rel = (fd - grad[c]).abs() / fd.abs().max(grad[c].abs()).max(1e-6);
            worst = worst.max(rel);
        }
    }
    assert!(worst < 1e-4, "max relative error {worst}");
}

#[test]
fn training_lowers_loss_and_zero_epochs_is_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let examples: Vec<TrainExample> = (0..64).map(|_| example(&mut rng, 4, 3)).collect();
    let params = HeadParameters::seeded(4, 3, 9);
    let out = head::train_head(params.clone(), &examples, &TrainingSpec { seed: 1, ..TrainingSpec::default() }).unwrap();
    assert!(out.loss_history.last().unwrap() < &out.loss_history[0]);
    let none = head::train_head(params.clone(), &examples, &TrainingSpec { epochs: 0, ..TrainingSpec::default() }).unwrap();
    assert_eq!(none.params, params);
}
