//! Command-line entry point: `score | fit | evaluate | simulate | report`.

use std::collections::HashMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use edtr_core::metrics::ScoredPrediction;
use edtr_core::{EntropyForm, FusionParameters, HeadParameters, Scorer};
use serde::Serialize;

use crate::config::{self, FileConfig};
use crate::embed;
use crate::error::{Error, Result};
use crate::ingest::{self, Dataset};
use crate::persist;
use crate::pipeline::{self, ConfidenceReport, FitOptions, Split, SplitSpec};
use crate::report::{self, BaselineMetrics, Manifest};
use crate::synth::{self, GeneratorSpec};

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Parser)]
#[command(name = "edtr", version, about = "Calibrated confidence for multi-path reasoning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score every sample and write scores.jsonl.
    Score(RunArgs),
    /// Train the Dirichlet head and the fusion combiner.
    Fit(RunArgs),
    /// Compute calibration metrics against gold labels.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset.
    Simulate(SimulateArgs),
    /// Print a saved report and check it against its reliability bins.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FusionMode {
    Fixed,
    Trained,
}

#[derive(Debug, Clone, Args)]
struct RunArgs {
    /// TOML configuration; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// TOML file with a [topo.weights] section.
    #[arg(long)]
    weights: Option<PathBuf>,
    #[arg(long)]
    head: Option<PathBuf>,
    #[arg(long)]
    fusion: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// e.g. train:calib:test=0.6:0.2:0.2
    #[arg(long)]
    split: Option<String>,
    /// Restrict scoring to one split.
    #[arg(long, value_parser = ["train", "calib", "test"])]
    only: Option<String>,
    /// Fail on the first malformed line instead of skipping it.
    #[arg(long)]
    strict: bool,
    /// Compute homology barcodes.
    #[arg(long)]
    diagnostics: bool,
    #[arg(long, value_enum)]
    fusion_mode: Option<FusionMode>,
    /// Use the uncorrected entropy-confidence sign.
    #[arg(long)]
    raw_eq3: bool,
    /// `http://...` endpoint or `file:<path>` map for missing embeddings.
    #[arg(long, env = embed::ENDPOINT_ENV)]
    embed_endpoint: Option<String>,
}

#[derive(Debug, Clone, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Existing scores.jsonl; the dataset is scored in-process when absent.
    #[arg(long)]
    scores: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
struct SimulateArgs {
    /// Generator spec (TOML or JSON); defaults when absent.
    #[arg(long)]
    spec: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Args)]
struct ReportArgs {
    /// Directory holding report.json and reliability.csv.
    #[arg(long)]
    out: PathBuf,
}

/// Everything a run depends on after merging the config file and flags.
#[derive(Debug, Clone, Serialize)]
struct Resolved {
    dataset: PathBuf,
    weights: Option<PathBuf>,
    head: Option<PathBuf>,
    fusion: Option<PathBuf>,
    seed: u64,
    out: Option<PathBuf>,
    split: SplitSpec,
    only: Option<String>,
    strict: bool,
    diagnostics: bool,
    fusion_mode: Option<FusionMode>,
    raw_eq3: bool,
    embed_endpoint: Option<String>,
    #[serde(skip)]
    file: FileConfig,
}

fn resolve(args: &RunArgs) -> Result<Resolved> {
    let file = match &args.config {
        Some(p) => FileConfig::load(p)?,
        None => FileConfig::default(),
    };
    let dataset = args
        .dataset
        .clone()
        .or_else(|| file.dataset.clone())
        .ok_or_else(|| Error::Config(String::from("no dataset given (--dataset or `dataset` in the config)")))?;
    let fusion_mode = match (args.fusion_mode, file.fusion_mode.as_deref()) {
        (Some(m), _) => Some(m),
        (None, Some(s)) => Some(FusionMode::from_str(s, true).map_err(|_| Error::Config(format!("unknown fusion_mode {s:?}")))?),
        (None, None) => None,
    };
    let split = match args.split.as_deref().or(file.split.as_deref()) {
        Some(s) => SplitSpec::parse(s)?,
        None => SplitSpec::default(),
    };
    let r = Resolved {
        dataset,
        weights: args.weights.clone().or_else(|| file.weights.clone()),
        head: args.head.clone().or_else(|| file.head.clone()),
        fusion: args.fusion.clone().or_else(|| file.fusion.clone()),
        seed: args.seed.or(file.seed).unwrap_or(DEFAULT_SEED),
        out: args.out.clone().or_else(|| file.out.clone()),
        split,
        only: args.only.clone(),
        strict: args.strict || file.strict.unwrap_or(false),
        diagnostics: args.diagnostics || file.diagnostics.unwrap_or(false),
        fusion_mode,
        raw_eq3: args.raw_eq3 || file.raw_eq3.unwrap_or(false),
        embed_endpoint: args.embed_endpoint.clone().or_else(|| file.embed_endpoint.clone()),
        file,
    };
    for p in [Some(&r.dataset), r.weights.as_ref(), r.head.as_ref(), r.fusion.as_ref()].into_iter().flatten() {
        if !p.is_file() {
            return Err(Error::Config(format!("{}: no such file", p.display())));
        }
    }
    Ok(r)
}

fn load(r: &Resolved) -> Result<Dataset> {
    let source = r.embed_endpoint.as_deref().map(embed::from_descriptor).transpose()?;
    let outcome = ingest::load_dataset_with(&r.dataset, r.strict, source.as_deref())?;
    for d in &outcome.dropped {
        eprintln!("warning: skipped line {}: {}", d.line, d.reason);
    }
    Ok(outcome.dataset)
}

fn build_scorer(r: &Resolved, dataset: &Dataset) -> Result<Scorer> {
    let head = match &r.head {
        Some(p) => persist::load_head(p)?,
        None => {
            let k = dataset.uniform_k().ok_or_else(|| {
                Error::Incompatible(String::from("samples have different trajectory counts; supply --head"))
            })?;
            let n = r.file.train.components.unwrap_or(pipeline::DEFAULT_COMPONENTS);
            HeadParameters::zeros(k, n)
        }
    };
    let mut scorer = pipeline::scorer_for(head, r.diagnostics);
    scorer.seed = r.seed;
    scorer.entropy_form = if r.raw_eq3 { EntropyForm::AsPrinted } else { EntropyForm::SignCorrected };
    scorer.weights = match (&r.weights, &r.file.topo.weights) {
        (Some(p), _) => config::load_weights(p)?,
        (None, Some(w)) => w.to_weights()?,
        (None, None) => Default::default(),
    };
    let loaded = r.fusion.as_deref().map(persist::load_fusion).transpose()?.map(|d| d.params);
    scorer.fusion = match (r.fusion_mode, loaded) {
        (Some(FusionMode::Fixed), Some(p @ FusionParameters::Fixed(_))) => p,
        (Some(FusionMode::Fixed), _) => FusionParameters::default(),
        (Some(FusionMode::Trained), Some(p @ FusionParameters::Trained(_))) => p,
        (Some(FusionMode::Trained), Some(_)) => {
            return Err(Error::Incompatible(String::from("--fusion-mode trained needs a trained fusion file")))
        }
        (Some(FusionMode::Trained), None) => {
            return Err(Error::Config(String::from("--fusion-mode trained needs --fusion")))
        }
        (None, Some(p)) => p,
        (None, None) => FusionParameters::default(),
    };
    Ok(scorer)
}

fn selected(r: &Resolved, dataset: &Dataset) -> Result<Vec<usize>> {
    match r.only.as_deref() {
        None => Ok((0..dataset.samples.len()).collect()),
        Some(name) => {
            let which = Split::parse(name).expect("validated by clap");
            let splits = pipeline::assign_splits(dataset, &r.split, r.seed)?;
            Ok(pipeline::indices_of(&splits, which))
        }
    }
}

fn to_jsonl<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut out = String::new();
    for row in rows {
        out.push_str(&serde_json::to_string(row).map_err(|e| Error::json("serialising output", e))?);
        out.push('\n');
    }
    Ok(out)
}

fn manifest_for(command: &str, r: &Resolved) -> Result<Manifest> {
    let mut m = Manifest::new(command, r.seed, r)?;
    for p in [Some(&r.dataset), r.weights.as_ref(), r.head.as_ref(), r.fusion.as_ref()].into_iter().flatten() {
        m.input(p)?;
    }
    Ok(m)
}

fn cmd_score(args: &RunArgs) -> Result<()> {
    let r = resolve(args)?;
    let dataset = load(&r)?;
    let scorer = build_scorer(&r, &dataset)?;
    let indices = selected(&r, &dataset)?;
    let scored: Vec<ConfidenceReport> = pipeline::score_indices(&dataset, &indices, &scorer)?.into_iter().map(|(s, _)| s).collect();
    let body = to_jsonl(&scored)?;
    match &r.out {
        Some(dir) => {
            let mut m = manifest_for("score", &r)?;
            m.output(dir, "scores.jsonl", body.as_bytes())?;
            m.write(dir)?;
            eprintln!("scored {} samples into {}", scored.len(), dir.join("scores.jsonl").display());
        }
        None => print!("{body}"),
    }
    Ok(())
}

fn cmd_fit(args: &RunArgs) -> Result<i32> {
    let r = resolve(args)?;
    let out = r.out.clone().ok_or_else(|| Error::Config(String::from("fit needs --out")))?;
    let dataset = load(&r)?;
    if !dataset.is_labelled() {
        return Err(Error::FitPrecondition(String::from("dataset has no gold answers")));
    }
    let mut base = build_scorer(&r, &dataset)?;
    if r.head.is_none() {
        base.head = HeadParameters::seeded(base.head.k, base.head.n, r.seed);
    }
    let splits = pipeline::assign_splits(&dataset, &r.split, r.seed)?;
    let opts = FitOptions {
        training: r.file.training(r.seed),
        combiner: r.file.combiner(),
        seed: r.seed,
        head_components: base.head.n,
        n_bins: r.file.metrics.bins.unwrap_or(edtr_core::metrics::DEFAULT_BINS),
    };
    let fitted = pipeline::fit(&dataset, &splits, &base, &opts)?;
    let mut m = manifest_for("fit", &r)?;
    m.output(&out, "head.json", persist::to_pretty_json(&persist::HeadDoc::from_params(&fitted.head))?.as_bytes())?;
    m.output(&out, "fusion.json", persist::to_pretty_json(&fitted.fusion)?.as_bytes())?;
    m.output(&out, "fit_summary.json", persist::to_pretty_json(&fitted.summary)?.as_bytes())?;
    m.write(&out)?;
    let h = &fitted.summary.held_out;
    println!(
        "held-out n={} ece fixed/before={:.4} trained/after={:.4} agreement={:.4}",
        h.n, h.ece_before, h.ece_after, h.ece_agreement_baseline
    );
    if let Some(w) = &fitted.summary.warning {
        eprintln!("warning: {w}");
    }
    Ok(0)
}

/// The fields `evaluate` needs from a scores file; other keys are ignored.
#[derive(Debug, Clone, serde::Deserialize)]
struct ScoreLine {
    query_id: String,
    confidence: f64,
    #[serde(default)]
    fusion_mode: Option<String>,
}

impl From<ConfidenceReport> for ScoreLine {
    fn from(r: ConfidenceReport) -> Self {
        Self { query_id: r.query_id, confidence: r.confidence, fusion_mode: Some(r.fusion_mode) }
    }
}

fn read_scores(path: &Path) -> Result<Vec<ScoreLine>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| Error::MalformedLine { line: i + 1, reason: e.to_string() }))
        .collect()
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<()> {
    let r = resolve(&args.run)?;
    let dataset = load(&r)?;
    let scores = match &args.scores {
        Some(p) => read_scores(p)?,
        None => {
            let scorer = build_scorer(&r, &dataset)?;
            let indices = selected(&r, &dataset)?;
            pipeline::score_indices(&dataset, &indices, &scorer)?.into_iter().map(|(s, _)| s.into()).collect()
        }
    };
    let by_id: HashMap<&str, usize> = dataset.samples.iter().enumerate().map(|(i, s)| (s.query_id.as_str(), i)).collect();
    let missing: Vec<&str> = scores.iter().map(|s| s.query_id.as_str()).filter(|id| !by_id.contains_key(id)).collect();
    if !missing.is_empty() {
        return Err(Error::MalformedLine {
            line: 0,
            reason: format!("scores reference query ids absent from the dataset: {}", missing.join(", ")),
        });
    }
    let mut preds = Vec::new();
    let mut answers = Vec::new();
    let mut baseline = Vec::new();
    for s in &scores {
        let sample = &dataset.samples[by_id[s.query_id.as_str()]];
        let (Some(correct), Some(gold)) = (sample.correct, sample.gold_answer.as_deref()) else { continue };
        if !(0.0..=1.0).contains(&s.confidence) {
            return Err(Error::MalformedLine { line: 0, reason: format!("query {}: confidence {} outside [0, 1]", s.query_id, s.confidence) });
        }
        preds.push(ScoredPrediction { confidence: s.confidence, correct });
        baseline.push(ScoredPrediction { confidence: sample.agreement_fraction(), correct });
        answers.push((sample.predicted_answer.clone(), ingest::normalize_answer(gold)));
    }
    if preds.is_empty() {
        return Err(Error::FitPrecondition(String::from("no scored sample has a gold answer")));
    }
    let n_bins = r.file.metrics.bins.unwrap_or(edtr_core::metrics::DEFAULT_BINS);
    let (mut rep, bins) = report::evaluate(&preds, &answers, n_bins, &r.file.composite())?;
    rep.fusion_mode = scores.first().and_then(|s| s.fusion_mode.clone());
    rep.baseline = Some(BaselineMetrics {
        name: String::from("agreement_fraction"),
        ece: edtr_core::metrics::ece(&baseline, n_bins)?,
        brier: edtr_core::metrics::brier(&baseline)?,
    });
    println!(
        "n={} accuracy={:.4} f1={:.4} ece={:.4} brier={:.4} composite={:.4}",
        rep.n, rep.accuracy, rep.f1, rep.ece, rep.brier, rep.composite
    );
    if let Some(dir) = &r.out {
        let mut m = manifest_for("evaluate", &r)?;
        if let Some(p) = &args.scores {
            m.input(p)?;
        }
        m.output(dir, "report.json", persist::to_pretty_json(&rep)?.as_bytes())?;
        m.output(dir, "reliability.csv", report::reliability_csv(&bins).as_bytes())?;
        m.write(dir)?;
    }
    Ok(())
}

fn load_spec(path: &Path) -> Result<GeneratorSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::InvalidSpec(format!("{}: {e}", path.display())))?;
    let spec: GeneratorSpec = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?
    } else {
        toml::from_str(&text).map_err(|e| Error::InvalidSpec(e.to_string()))?
    };
    spec.validate()?;
    Ok(spec)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(p) => load_spec(p)?,
        None => GeneratorSpec::default(),
    };
    let seed = args.seed.unwrap_or(DEFAULT_SEED);
    let dataset = synth::synth_dataset(&spec, seed)?;
    let mut m = Manifest::new("simulate", seed, &spec)?;
    if let Some(p) = &args.spec {
        m.input(p)?;
    }
    m.output(&args.out, "dataset.jsonl", ingest::dataset_to_jsonl(&dataset)?.as_bytes())?;
    m.write(&args.out)?;
    eprintln!("wrote {} samples to {}", dataset.samples.len(), args.out.join("dataset.jsonl").display());
    Ok(())
}

fn cmd_report(args: &ReportArgs) -> Result<()> {
    let rp = args.out.join("report.json");
    let cp = args.out.join("reliability.csv");
    let text = std::fs::read_to_string(&rp).map_err(|e| Error::io(&rp, e))?;
    let rep: report::EvaluationReport = serde_json::from_str(&text).map_err(|e| Error::json(rp.display().to_string(), e))?;
    let bins = report::parse_reliability_csv(&std::fs::read_to_string(&cp).map_err(|e| Error::io(&cp, e))?)?;
    let recomputed = edtr_core::metrics::ece_from_bins(&bins);
    print!("{}", report::render_bins(&bins));
    println!(
        "accuracy={:.4} f1={:.4} ece={:.4} brier={:.4} composite={:.4}",
        rep.accuracy, rep.f1, rep.ece, rep.brier, rep.composite
    );
    println!("composite formula: {}", rep.composite_formula);
    if (recomputed - rep.ece).abs() > 1e-12 {
        return Err(Error::MalformedLine {
            line: 0,
            reason: format!("report ece {} disagrees with reliability bins ({recomputed})", rep.ece),
        });
    }
    Ok(())
}

/// Parses `args` (program name first) and runs the command; returns the
/// process exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match &cli.command {
        Command::Score(a) => cmd_score(a).map(|_| 0),
        Command::Fit(a) => cmd_fit(a),
        Command::Evaluate(a) => cmd_evaluate(a).map(|_| 0),
        Command::Simulate(a) => cmd_simulate(a).map(|_| 0),
        Command::Report(a) => cmd_report(a).map(|_| 0),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
