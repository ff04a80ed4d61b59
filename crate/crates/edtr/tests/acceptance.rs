//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Run with `cargo test -p edtr --test acceptance`.

use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use edtr_core::dirichlet::{dirichlet_confidence, dirichlet_features, entropy_confidence};
use edtr_core::geometry::{distance_summary, PointCloud};
use edtr_core::head::{self, HeadParameters, Target, TrainExample};
use edtr_core::homology::{h0_barcode, h1_barcode, DEFAULT_H1_CAP};
use edtr_core::metrics::{self, CompositeFormula, ScoredPrediction};
use edtr_core::topo::{topo_profile, FeatureWeights};
use edtr_core::{EntropyForm, TrajectoryStats};
use edtr_oracle as oracle;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn random_cloud(rng: &mut ChaCha8Rng, k: usize, d: usize) -> Vec<Vec<f64>> {
    let scale = 0.05 + rng.random::<f64>() * 0.8;
    let offset: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
    (0..k)
        .map(|_| {
            offset
                .iter()
                .map(|o| {
                    let z: f64 = StandardNormal.sample(rng);
                    o + scale * z
                })
                .collect()
        })
        .collect()
}

fn features_vs_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..200 {
        let k = rng.random_range(2..=8);
        let d = rng.random_range(2..=32);
        let pts = random_cloud(&mut rng, k, d);
        let got = topo_profile(&PointCloud::from_rows(&pts).map_err(|e| e.to_string())?, &FeatureWeights::default(), 0)
            .map_err(|e| e.to_string())?
            .features
            .to_array();
        let want = oracle::features(&pts);
        for f in 0..8 {
            let err = (got[f] - want[f]).abs();
            worst = worst.max(err);
            check(err <= 1e-9, || format!("cloud {case} (k={k}, D={d}) feature {f}: {} vs {}", got[f], want[f]))?;
        }
    }
    Ok(format!("200 clouds, max abs error {worst:.2e}"))
}

fn risk_contract() -> Outcome {
    let weights = FeatureWeights::default();
    let sum: f64 = weights.as_array().iter().sum();
    check((sum - 1.0).abs() <= 1e-9, || format!("default weights sum to {sum}"))?;
    check(FeatureWeights::new([0.2; 8]).is_err(), || String::from("weights summing to 1.6 accepted"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut flagged = 0usize;
    for case in 0..10_000 {
        let k = rng.random_range(2..=8);
        let d = rng.random_range(2..=32);
        let mut pts = random_cloud(&mut rng, k, d);
        if case % 10 == 0 {
            for p in &mut pts {
                p.iter_mut().for_each(|v| *v *= 40.0);
            }
        }
        let prof = topo_profile(&PointCloud::from_rows(&pts).map_err(|e| e.to_string())?, &weights, case)
            .map_err(|e| e.to_string())?;
        check((0.0..=1.0).contains(&prof.risk_topo), || format!("cloud {case}: risk {}", prof.risk_topo))?;
        let raw = prof.features.to_array();
        for f in 0..8 {
            let expect = raw[f].clamp(0.0, 1.0);
            check(prof.clamped[f] == expect && prof.clamped_flags[f] == (raw[f] != expect), || {
                format!("cloud {case} feature {f}: raw {} clamped {} flag {}", raw[f], prof.clamped[f], prof.clamped_flags[f])
            })?;
        }
        let recomputed: f64 = weights.as_array().iter().zip(&prof.clamped).map(|(w, c)| w * c).sum();
        check((recomputed - prof.risk_topo).abs() < 1e-12, || format!("cloud {case}: risk is not the weighted sum"))?;
        flagged += prof.clamped_flags.iter().any(|&f| f) as usize;
    }
    Ok(format!("10000 clouds in [0,1], weight sum {sum}, {flagged} clouds with clamp flags"))
}

fn homology_oracles() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for case in 0..100 {
        let k = rng.random_range(2..=8);
        let d = rng.random_range(1..=6);
        let pts = random_cloud(&mut rng, k, d);
        let b = h0_barcode(&distance_summary(&PointCloud::from_rows(&pts).map_err(|e| e.to_string())?));
        let deaths: Vec<f64> = b.bars.iter().filter(|b| b.is_finite()).map(|b| b.death).collect();
        check(deaths == oracle::single_linkage_heights(&pts), || format!("H0 cloud {case}"))?;
    }
    let mut loops = 0;
    for case in 0..50 {
        let k = rng.random_range(3..=6);
        let pts = random_cloud(&mut rng, k, 2);
        let b = h1_barcode(&distance_summary(&PointCloud::from_rows(&pts).map_err(|e| e.to_string())?), DEFAULT_H1_CAP)
            .map_err(|e| e.to_string())?;
        let got: Vec<(f64, f64)> = b.bars.iter().map(|b| (b.birth, b.death)).collect();
        check(got == oracle::h1_pairs(&pts), || format!("H1 cloud {case}: {got:?}"))?;
        loops += got.len();
    }
    let square = PointCloud::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).map_err(|e| e.to_string())?;
    let sq = h1_barcode(&distance_summary(&square), DEFAULT_H1_CAP).map_err(|e| e.to_string())?;
    check(
        sq.bars.len() == 1 && (sq.bars[0].birth - 1.0).abs() < 1e-12 && (sq.bars[0].death - 2f64.sqrt()).abs() < 1e-12,
        || format!("unit square bars {:?}", sq.bars),
    )?;
    Ok(format!("100 H0 clouds exact, 50 H1 clouds ({loops} loops) exact, square bar (1, 1.414214)"))
}

fn dirichlet_identities() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut min_alpha = f64::INFINITY;
    for case in 0..200 {
        let k = rng.random_range(2..=8);
        let n = rng.random_range(2..=6);
        let params = HeadParameters::seeded(k, n, case);
        let stats: Vec<TrajectoryStats> = (0..k)
            .map(|_| TrajectoryStats { variance: rng.random::<f64>() * 100.0 - 50.0, entropy: rng.random::<f64>() * 100.0 - 50.0 })
            .collect();
        let alpha = head::head_forward(&params, &stats).map_err(|e| e.to_string())?;
        min_alpha = alpha.iter().copied().fold(min_alpha, f64::min);
    }
    check(min_alpha > 1.0, || format!("alpha {min_alpha} not above 1"))?;
    let a = [1.5, 1.5];
    let ec = entropy_confidence(&a, EntropyForm::SignCorrected);
    let cd = dirichlet_confidence(&a, EntropyForm::SignCorrected);
    check((ec - 0.3607).abs() < 1e-3 && (cd - 0.5306).abs() < 1e-3, || format!("fixture gives {ec}, {cd}"))?;
    for n in 2..=8 {
        let f = dirichlet_features(&vec![2.7; n]).map_err(|e| e.to_string())?;
        check((f.expected_max - 1.0 / n as f64).abs() < 1e-12, || format!("symmetric n={n}: {}", f.expected_max))?;
    }
    let alpha = [4.0, 2.5, 1.5];
    let f = dirichlet_features(&alpha).map_err(|e| e.to_string())?;
    let gammas: Vec<Gamma<f64>> = alpha.iter().map(|&a| Gamma::new(a, 1.0).expect("positive shape")).collect();
    let mut xs = Vec::with_capacity(1_000_000);
    for _ in 0..1_000_000 {
        let g: Vec<f64> = gammas.iter().map(|d| d.sample(&mut rng)).collect();
        xs.push(g[0] / g.iter().sum::<f64>());
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / n;
    let se = ((m4 - var * var) / n).sqrt();
    let z = (var - f.top_class_variance).abs() / se;
    check(z < 3.0, || format!("MC variance {var} vs {} ({z:.2} SE)", f.top_class_variance))?;
    Ok(format!("min alpha {min_alpha:.6}, (1.5,1.5) -> {ec:.4}/{cd:.4}, MC variance within {z:.2} SE"))
}

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let eps = 1e-5;
    let mut worst: f64 = 0.0;
    for case in 0..20 {
        let k = rng.random_range(2..=6);
        let n = rng.random_range(2..=5);
        let params = HeadParameters::seeded(k, n, 500 + case);
        let stats = (0..k)
            .map(|_| TrajectoryStats { variance: rng.random::<f64>() * 0.25, entropy: rng.random::<f64>() * 0.7 })
            .collect();
        let components = rng.random_range(2..=n);
        let target = if rng.random::<bool>() { Target::Class(rng.random_range(0..components)) } else { Target::Uniform };
        let ex = TrainExample { stats, components, target };
        let (_, grad) = head::loss_and_gradient(&params, &ex).map_err(|e| e.to_string())?;
        let flat = params.to_flat();
        let mut probe = params.clone();
        for c in 0..flat.len() {
            let mut shifted = flat.clone();
            shifted[c] += eps;
            probe.set_flat(&shifted).map_err(|e| e.to_string())?;
            let lp = head::example_loss(&probe, &ex).map_err(|e| e.to_string())?;
            shifted[c] -= 2.0 * eps;
            probe.set_flat(&shifted).map_err(|e| e.to_string())?;
            let lm = head::example_loss(&probe, &ex).map_err(|e| e.to_string())?;
            let fd = (lp - lm) / (2.0 * eps);
            worst = worst.max((fd - grad[c]).abs() / fd.abs().max(grad[c].abs()).max(1e-6));
        }
    }
    check(worst < 1e-4, || format!("max relative error {worst:.3e}"))?;
    Ok(format!("20 parameter/input pairs, every coordinate, max relative error {worst:.2e}"))
}

fn metric_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let preds: Vec<ScoredPrediction> = (0..10_000)
        .map(|_| {
            let c: f64 = rng.random();
            ScoredPrediction { confidence: c, correct: rng.random::<f64>() < c }
        })
        .collect();
    let e = metrics::ece(&preds, 10).map_err(|e| e.to_string())?;
    check(e < 0.02, || format!("calibrated ECE {e}"))?;
    let b = metrics::brier(&[ScoredPrediction { confidence: 0.7, correct: true }]).map_err(|e| e.to_string())?;
    check((b - 0.09).abs() <= 1e-12, || format!("Brier {b}"))?;
    let bins = metrics::reliability_bins(&preds, 10).map_err(|e| e.to_string())?;
    let csv = edtr::report::reliability_csv(&bins);
    let reread = edtr::report::parse_reliability_csv(&csv).map_err(|e| e.to_string())?;
    let from_bins = metrics::ece_from_bins(&reread);
    check((from_bins - e).abs() <= 1e-12, || format!("ECE from emitted bins {from_bins} vs {e}"))?;
    Ok(format!("calibrated ECE {e:.4}, Brier 0.7 -> {b}, ECE from reliability.csv matches"))
}

fn edtr(args: &[&str]) -> Result<String, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_edtr"))
        .args(args)
        .env_remove("EDTR_EMBED_ENDPOINT")
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!("edtr {args:?} exited {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    Ok(String::from_utf8_lossy(&out.stdout).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn standard_fixture(dir: &Path) -> Result<std::path::PathBuf, String> {
    let sim = dir.join("sim");
    edtr(&["simulate", "--seed", "42", "--out", s(&sim)])?;
    Ok(sim.join("dataset.jsonl"))
}

fn end_to_end_ordering() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = standard_fixture(dir.path())?;
    let scores = dir.path().join("scores");
    edtr(&["score", "--dataset", s(&data), "--out", s(&scores)])?;
    let text = fs::read_to_string(scores.join("scores.jsonl")).map_err(|e| e.to_string())?;
    let conf: Vec<f64> = text
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).ok().and_then(|v| v["confidence"].as_f64()))
        .collect::<Option<_>>()
        .ok_or("unreadable scores")?;
    check(conf.len() == 200, || format!("{} scores", conf.len()))?;
    let confident = conf[..100].iter().sum::<f64>() / 100.0;
    let uncertain = conf[100..].iter().sum::<f64>() / 100.0;
    let gap = confident - uncertain;
    check(gap > 0.1, || format!("confident {confident:.4} vs uncertain {uncertain:.4}"))?;
    let fit = dir.path().join("fit");
    edtr(&["fit", "--dataset", s(&data), "--seed", "42", "--out", s(&fit)])?;
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(fit.join("fit_summary.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let before = summary["held_out"]["ece_before"].as_f64().ok_or("no ece_before")?;
    let after = summary["held_out"]["ece_after"].as_f64().ok_or("no ece_after")?;
    check(after < before, || format!("held-out ECE after fit {after:.4} not below fixed-mode {before:.4}"))?;
    Ok(format!("gap {gap:.3} ({confident:.3} vs {uncertain:.3}); held-out ECE {before:.3} -> {after:.3}"))
}

fn snapshot(dir: &Path) -> Result<Vec<(String, Vec<u8>)>, String> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .map_err(|e| e.to_string())?
        .map(|e| {
            let e = e.map_err(|e| e.to_string())?;
            Ok((e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).map_err(|e| e.to_string())?))
        })
        .collect::<Result<_, String>>()?;
    files.sort();
    Ok(files)
}

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let sim = dir.path().join("sim");
    let data = sim.join("dataset.jsonl");
    let score = dir.path().join("score");
    let fit = dir.path().join("fit");
    let mut runs = Vec::new();
    for _ in 0..2 {
        edtr(&["simulate", "--seed", "7", "--out", s(&sim)])?;
        edtr(&["score", "--dataset", s(&data), "--seed", "7", "--diagnostics", "--out", s(&score)])?;
        edtr(&["fit", "--dataset", s(&data), "--seed", "7", "--out", s(&fit)])?;
        runs.push((snapshot(&sim)?, snapshot(&score)?, snapshot(&fit)?));
    }
    let names = |v: &[(String, Vec<u8>)]| v.iter().map(|(n, _)| n.clone()).collect::<Vec<_>>().join(",");
    for (label, a, b) in [
        ("simulate", &runs[0].0, &runs[1].0),
        ("score", &runs[0].1, &runs[1].1),
        ("fit", &runs[0].2, &runs[1].2),
    ] {
        check(a == b, || format!("{label} outputs differ across runs"))?;
    }
    Ok(format!(
        "simulate [{}], score [{}], fit [{}] byte-identical",
        names(&runs[0].0),
        names(&runs[0].1),
        names(&runs[0].2)
    ))
}

fn composite_transparency() -> Outcome {
    let c = metrics::composite(0.550, 0.572, 0.306, 0.221, &CompositeFormula::default());
    check(format!("{c:.3}") == "0.649", || format!("composite {c}"))?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let data = standard_fixture(dir.path())?;
    let out = dir.path().join("eval");
    edtr(&["evaluate", "--dataset", s(&data), "--out", s(&out)])?;
    let rep: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("report.json")).map_err(|e| e.to_string())?)
            .map_err(|e| e.to_string())?;
    let formula = rep["composite_formula"].as_str().unwrap_or_default();
    let note = rep["composite_note"].as_str().unwrap_or_default();
    check(formula == CompositeFormula::default().name(), || format!("report formula {formula:?}"))?;
    check(note.contains("0.662") && note.contains("0.649"), || format!("report note {note:?}"))?;
    Ok(format!("default formula gives {c:.5} -> 0.649; report names \"{formula}\" and notes 0.662"))
}

fn main() {
    let criteria: [(&str, Duration, fn() -> Outcome); 9] = [
        ("feature oracles", Duration::from_secs(10), features_vs_oracle),
        ("risk aggregate contract", Duration::from_secs(30), risk_contract),
        ("homology oracles", Duration::from_secs(60), homology_oracles),
        ("dirichlet identities", Duration::from_secs(60), dirichlet_identities),
        ("gradient check", Duration::from_secs(10), gradient_check),
        ("calibration metrics", Duration::from_secs(60), metric_soundness),
        ("end-to-end ordering", Duration::from_secs(120), end_to_end_ordering),
        ("determinism", Duration::from_secs(120), determinism),
        ("composite transparency", Duration::from_secs(60), composite_transparency),
    ];
    let mut failed = 0;
    for (i, (name, budget, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let result = match result {
            Ok(detail) if took > *budget => Err(format!("{detail}; took {took:.1?}, budget {budget:?}")),
            other => other,
        };
        match result {
            Ok(detail) => println!("criterion {}: PASS {name}: {detail} [{took:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {}: FAIL {name}: {why} [{took:.2?}]", i + 1);
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
