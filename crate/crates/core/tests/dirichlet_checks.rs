use edtr_core::dirichlet::{dirichlet_confidence, dirichlet_features, entropy_confidence, trajectory_stats, EntropyForm};
use edtr_core::head::{self, HeadParameters};
use edtr_core::TrajectoryStats;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

#[test]
fn digamma_table_fixture() {
    // ψ(3) = 0.92278, ψ(1.5) = 0.03649
    let a = [1.5, 1.5];
    let e = entropy_confidence(&a, EntropyForm::SignCorrected);
    let by_table = 1.0 / (1.0 + 2.0 * (0.92278 - 0.03649));
    assert!((e - by_table).abs() < 1e-3);
    assert!((e - 0.3607).abs() < 1e-3);
    let sigma1 = 1.0 / (1.0 + (-1.0f64).exp());
    assert!((dirichlet_confidence(&a, EntropyForm::SignCorrected) - (0.5 + sigma1 + by_table) / 3.0).abs() < 1e-3);
    assert!((dirichlet_confidence(&a, EntropyForm::SignCorrected) - 0.5306).abs() < 1e-3);
}

#[test]
fn closed_form_features() {
    let f = dirichlet_features(&[1.0, 1.0]).unwrap();
    assert_eq!(f.concentration, 2.0);
    assert!(f.diff_entropy.abs() < 1e-12);
    assert_eq!(f.expected_max, 0.5);
    assert!((f.top_class_variance - 1.0 / 12.0).abs() < 1e-15);
    assert!((dirichlet_features(&[2.0, 2.0]).unwrap().top_class_variance - 0.05).abs() < 1e-15);
    for n in 1..9 {
        let f = dirichlet_features(&vec![3.7; n]).unwrap();
        assert!((f.expected_max - 1.0 / n as f64).abs() < 1e-12);
    }
    let capped = dirichlet_confidence(&[100.0, 1.01], EntropyForm::SignCorrected);
    // the entropy term stays low here (≈ 0.162), so the clip does not bind
    assert!((capped - 0.717260).abs() < 1e-5, "{capped}");
}

#[test]
fn entropy_confidence_falls_with_more_components() {
    let mut last = f64::INFINITY;
    for n in 1..10 {
        let e = entropy_confidence(&vec![2.0; n], EntropyForm::SignCorrected);
        assert!(e < last);
        last = e;
    }
}

#[test]
fn top_class_variance_matches_monte_carlo() {
    let alpha = [4.0, 2.5, 1.5];
    let f = dirichlet_features(&alpha).unwrap();
    let gammas: Vec<Gamma<f64>> = alpha.iter().map(|&a| Gamma::new(a, 1.0).unwrap()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(1234);
    let draws = 1_000_000;
    let (mut s1, mut s2) = (0.0, 0.0);
    let mut xs = Vec::with_capacity(draws);
    for _ in 0..draws {
        let g: Vec<f64> = gammas.iter().map(|d| d.sample(&mut rng)).collect();
        let x = g[0] / g.iter().sum::<f64>();
        s1 += x;
        s2 += x * x;
        xs.push(x);
    }
    let n = draws as f64;
    let mean = s1 / n;
    let var = s2 / n - mean * mean;
    // standard error of the sample variance from the fourth central moment
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var) / n).sqrt();
    assert!((var - f.top_class_variance).abs() < 3.0 * se, "{var} vs {} (se {se})", f.top_class_variance);
}

#[test]
fn trajectory_stat_fixtures() {
    let s = trajectory_stats(&[1.0, 1.0, 1.0], None).unwrap();
    assert_eq!((s.variance, s.entropy), (0.0, 0.0));
    let s = trajectory_stats(&[0.5, 0.5], None).unwrap();
    assert!((s.entropy - 2f64.ln()).abs() < 1e-12);
    let s = trajectory_stats(&[0.0, 1.0], None).unwrap();
    assert_eq!((s.variance, s.entropy), (0.25, 0.0));
}

fn oracle_layers(p: &HeadParameters) -> Vec<(Vec<Vec<f64>>, Vec<f64>)> {
    p.layers
        .iter()
        .map(|l| {
            let w = (0..l.outputs).map(|o| l.weights[o * l.inputs..(o + 1) * l.inputs].to_vec()).collect();
            (w, l.bias.clone())
        })
        .collect()
}

#[test]
fn forward_matches_straight_line_oracle() {
    let params = HeadParameters::seeded(5, 5, 13);
    let stats: Vec<TrajectoryStats> = (0..5)
        .map(|i| TrajectoryStats { variance: 0.01 * i as f64, entropy: 0.3 + 0.1 * i as f64 })
        .collect();
    let got = head::head_forward(&params, &stats).unwrap();
    let want = edtr_oracle::mlp_alpha(&oracle_layers(&params), edtr_oracle::relu, &head::head_input(&stats));
    for (g, w) in got.iter().zip(&want) {
        assert!((g - w).abs() < 1e-9);
    }
    let zero = head::head_forward(&HeadParameters::zeros(5, 5), &stats).unwrap();
    assert!(zero.iter().all(|a| (a - (1.0 + 2f64.ln())).abs() < 1e-15));
}
