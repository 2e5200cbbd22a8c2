//! The `clustsel` command line.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
//! violation. Failures print one line on standard error.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::clusterlib::{Algorithm, HyperValue};
use crate::neuralnet::{read_weights, write_weights, Ablation, ArchConfig, NnError, TrainConfig};
use crate::pipeline::{
    self, evaluate_holdout, generate_datasets, label_repository, load_repository, realdata_pipeline, run_ablations, run_experiment,
    write_labels, AblationRow, EvaluationReport, Manifest, PipelineError, Selector,
};
use crate::synthgen::read_dataset_csv;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_INVARIANT: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "clustsel", version, about = "Recommend a clustering algorithm from a raw data matrix", disable_help_subcommand = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate the synthetic datasets listed in a manifest
    Generate(GenerateArgs),
    /// Cluster every dataset with every algorithm and derive labels
    Label(LabelArgs),
    /// Train the recommender and write weights plus learning curves
    Train(TrainArgs),
    /// Compare the recommender with the validity-index baselines
    Evaluate(EvaluateArgs),
    /// Train the four architecture variants on shared folds
    Ablate(AblateArgs),
    /// Recommend an algorithm, cluster count and hyperparameters for a CSV
    Recommend(RecommendArgs),
    /// Render a stored JSON report
    Report(ReportArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Master seed for every random stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads for dataset-level work (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct GenerateArgs {
    /// Manifest JSON [default: built-in four-configuration desk manifest]
    #[arg(long)]
    manifest: Option<PathBuf>,
    /// Repository directory to write
    #[arg(long, default_value = "repo")]
    out: PathBuf,
    /// Master seed, overriding the manifest's [default: manifest seed, 0 for the built-in manifest]
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for dataset-level work (0 = all cores)
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Repository directory
    #[arg(long, default_value = "repo")]
    repo: PathBuf,
    /// ARI threshold for a positive label [default: manifest value, 0.8]
    #[arg(long)]
    tau: Option<f64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct TrainOpts {
    /// Repository directory
    #[arg(long, default_value = "repo")]
    repo: PathBuf,
    /// ARI threshold for a positive label [default: manifest value, 0.8]
    #[arg(long)]
    tau: Option<f64>,
    /// Training epochs per fold
    #[arg(long, default_value_t = 30)]
    epochs: usize,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    opts: TrainOpts,
    /// Architecture variant
    #[arg(long, default_value = "full")]
    ablation: Ablation,
    /// Weights file to write
    #[arg(long, default_value = "model.crnw")]
    weights: PathBuf,
    /// Directory for the curves CSV and evaluation report [default: next to the weights]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[command(flatten)]
    opts: TrainOpts,
    /// Architecture variant
    #[arg(long, default_value = "full")]
    ablation: Ablation,
    /// Score these weights on the held-out split [default: none, cross-validate instead]
    #[arg(long)]
    weights: Option<PathBuf>,
    /// Write the report JSON here [default: not written]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct AblateArgs {
    #[command(flatten)]
    opts: TrainOpts,
    /// Labelled CSV datasets for the real-data protocol
    real: Vec<PathBuf>,
    /// Candidate cluster counts for the real-data protocol, inclusive
    #[arg(long, default_value = "2:10", value_parser = parse_k_range)]
    k_range: KRange,
    /// Write the ablation table JSON here [default: not written]
    #[arg(long)]
    out: Option<PathBuf>,
    /// Print JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Debug, Args)]
struct RecommendArgs {
    /// Dataset CSV (numeric columns, optional trailing `label` column)
    data: PathBuf,
    /// Trained weights
    #[arg(long, default_value = "model.crnw")]
    weights: PathBuf,
    /// Index used to pick k and tune hyperparameters
    #[arg(long, default_value = "ch")]
    selector: Selector,
    /// Candidate cluster counts, inclusive
    #[arg(long, default_value = "2:10", value_parser = parse_k_range)]
    k_range: KRange,
    /// Master seed for every random stream
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Report JSON written by `evaluate`, `train` or `ablate`
    file: PathBuf,
    /// Print normalised JSON instead of a table
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Debug)]
struct KRange(Vec<usize>);

fn parse_k_range(s: &str) -> Result<KRange, String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected a:b, got {s:?}"))?;
    let a: usize = a.trim().parse().map_err(|_| format!("bad lower bound in {s:?}"))?;
    let b: usize = b.trim().parse().map_err(|_| format!("bad upper bound in {s:?}"))?;
    if a == 0 || a > b {
        return Err(format!("need 1 <= a <= b, got {s:?}"));
    }
    Ok(KRange((a..=b).collect()))
}

/// JSON printed by `recommend`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Recommendation {
    pub algorithm: String,
    pub k: usize,
    pub hyperparams: serde_json::Map<String, serde_json::Value>,
    /// Sigmoid score per algorithm in the fixed algorithm order.
    pub scores: Vec<f64>,
    /// Algorithm names sorted by descending score.
    pub ranked: Vec<String>,
    pub selector: Selector,
    pub k_fallback: bool,
    pub ari: Option<f64>,
}

/// Anything `report` can render.
#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum StoredReport {
    Evaluation(EvaluationReport),
    Ablation(Vec<AblationRow>),
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Data(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Data(_) => EXIT_DATA,
            CliError::Invariant(_) => EXIT_INVARIANT,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Usage(m) | CliError::Data(m) | CliError::Invariant(m) => m,
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        let m = e.to_string().replace('\n', " ");
        match e {
            PipelineError::Usage(_) => CliError::Usage(m),
            PipelineError::Invariant(_) => CliError::Invariant(m),
            PipelineError::Nn(ref n) => match n {
                NnError::BadWeights(_) | NnError::Io(_) | NnError::EmptyRepository | NnError::InvalidFolds => CliError::Data(m),
                NnError::UnknownAblation(_) => CliError::Usage(m),
                _ => CliError::Invariant(m),
            },
            _ => CliError::Data(m),
        }
    }
}

impl From<NnError> for CliError {
    fn from(e: NnError) -> Self {
        PipelineError::Nn(e).into()
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

/// Run with the process's standard streams.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    run_cli_with(argv, &mut std::io::stdout().lock(), &mut std::io::stderr().lock())
}

pub fn run_cli_with<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(out, "{}", e.render());
                    EXIT_OK
                }
                _ => {
                    let first = e.to_string().lines().next().unwrap_or("usage error").to_string();
                    let _ = writeln!(err, "{first}");
                    EXIT_USAGE
                }
            };
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {}", e.message());
            e.code()
        }
    }
}

fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build().map_err(|e| CliError::Invariant(e.to_string()))?;
    pool.install(f)
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<(), CliError> {
    match cmd {
        Command::Generate(a) => generate(a, out),
        Command::Label(a) => label(a, out),
        Command::Train(a) => train(a, out),
        Command::Evaluate(a) => evaluate(a, out),
        Command::Ablate(a) => ablate(a, out),
        Command::Recommend(a) => recommend(a, out),
        Command::Report(a) => report(a, out),
    }
}

fn load_manifest(path: Option<&Path>, seed: u64) -> Result<Manifest, CliError> {
    match path {
        None => Ok(Manifest::desk(seed)),
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| CliError::Data(format!("cannot read {}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", p.display())))
        }
    }
}

fn generate(a: GenerateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let mut manifest = load_manifest(a.manifest.as_deref(), a.seed.unwrap_or(0))?;
    if let Some(seed) = a.seed {
        manifest.seed = seed;
    }
    let summary = with_jobs(a.jobs, || Ok(generate_datasets(&manifest, &a.out)?))?;
    if summary.up_to_date() {
        writeln!(out, "up-to-date ({} datasets)", manifest.total())?;
    } else {
        writeln!(out, "wrote {} files, {} unchanged, in {}", summary.written, summary.unchanged, a.out.display())?;
    }
    Ok(())
}

fn label(a: LabelArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (mut repo, summary) = with_jobs(a.common.jobs, || Ok(label_repository(&a.repo)?))?;
    let mut changed = !summary.up_to_date();
    if let Some(tau) = a.tau {
        repo.relabel(tau);
        changed |= write_labels(&a.repo, &repo)?;
    }
    if repo.flagged() {
        writeln!(out, "repository is empty")?;
    }
    let counts: Vec<String> = Algorithm::ALL
        .iter()
        .enumerate()
        .map(|(i, al)| format!("{}={}", al.name(), repo.labels.iter().filter(|l| l[i]).count()))
        .collect();
    writeln!(out, "{} datasets, {} failed runs, {}", repo.len(), repo.failed_runs, if changed { "updated" } else { "up-to-date" })?;
    writeln!(out, "positive labels: {}", counts.join(" "))?;
    Ok(())
}

fn load_for_training(o: &TrainOpts) -> Result<(pipeline::Repository, TrainConfig), CliError> {
    let mut repo = load_repository(&o.repo)?;
    if let Some(tau) = o.tau {
        repo.relabel(tau);
    }
    let cfg = TrainConfig { epochs: o.epochs, seed: o.common.seed, ..TrainConfig::default() };
    Ok((repo, cfg))
}

fn arch_for(repo: &pipeline::Repository, ablation: Ablation) -> ArchConfig {
    let (h, w) = repo.index.manifest.pad;
    ArchConfig::with_input(h, w).ablated(ablation)
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir)?;
    }
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

fn train(a: TrainArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (repo, cfg) = load_for_training(&a.opts)?;
    let arch = arch_for(&repo, a.ablation);
    let r = with_jobs(a.opts.common.jobs, || {
        let samples = repo.samples()?;
        Ok(run_experiment(&repo, &samples, &arch, &cfg)?)
    })?;
    let dir = a.out.clone().unwrap_or_else(|| a.weights.parent().map(Path::to_path_buf).unwrap_or_default());
    let stem = a.weights.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "model".into());
    if !dir.as_os_str().is_empty() {
        fs::create_dir_all(&dir)?;
    }
    if let Some(p) = a.weights.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(p)?;
    }
    let mut bytes = Vec::new();
    write_weights(&r.model, &mut bytes)?;
    fs::write(&a.weights, bytes)?;
    let curves = dir.join(format!("{stem}.curves.csv"));
    let mut csv = Vec::new();
    r.curves.write_csv(&mut csv).map_err(PipelineError::from)?;
    fs::write(&curves, csv)?;
    let report = dir.join(format!("{stem}.report.json"));
    write_json(&report, &r.report)?;
    write!(out, "{}", r.report.table())?;
    writeln!(out, "weights: {}\ncurves: {}\nreport: {}", a.weights.display(), curves.display(), report.display())?;
    Ok(())
}

fn evaluate(a: EvaluateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (repo, cfg) = load_for_training(&a.opts)?;
    let report = with_jobs(a.opts.common.jobs, || match &a.weights {
        Some(w) => {
            let f = fs::File::open(w).map_err(|e| CliError::Data(format!("cannot read {}: {e}", w.display())))?;
            let model = read_weights(std::io::BufReader::new(f))?;
            Ok(evaluate_holdout(&repo, &model, cfg.folds, cfg.seed)?)
        }
        None => {
            let samples = repo.samples()?;
            Ok(run_experiment(&repo, &samples, &arch_for(&repo, a.ablation), &cfg)?.report)
        }
    })?;
    if let Some(p) = &a.out {
        write_json(p, &report)?;
    }
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&report)?)?;
    } else {
        write!(out, "{}", report.table())?;
    }
    Ok(())
}

fn ablation_table(rows: &[AblationRow]) -> String {
    let mut s = format!("{:<10} {:>10} {:>10}", "variant", "mean", "median");
    let selectors: Vec<Selector> = rows.first().map(|r| r.real.iter().map(|x| x.selector).collect()).unwrap_or_default();
    for sel in &selectors {
        s.push_str(&format!(" {:>10} {:>10}", format!("{}-mean", sel.name()), format!("{}-median", sel.name())));
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:<10} {:>10.4} {:>10.4}", r.variant.name(), r.desk_mean, r.desk_median));
        for x in &r.real {
            s.push_str(&format!(" {:>10.4} {:>10.4}", x.mean, x.median));
        }
        s.push('\n');
    }
    s
}

fn ablate(a: AblateArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let (repo, cfg) = load_for_training(&a.opts)?;
    let real = a
        .real
        .iter()
        .map(|p| read_dataset_csv(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
        .collect::<Result<Vec<_>, _>>()?;
    let (rows, _) = with_jobs(a.opts.common.jobs, || {
        let samples = repo.samples()?;
        Ok(run_ablations(&repo, &samples, &cfg, &real, &a.k_range.0)?)
    })?;
    if let Some(p) = &a.out {
        write_json(p, &rows)?;
    }
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&rows)?)?;
    } else {
        write!(out, "{}", ablation_table(&rows))?;
    }
    Ok(())
}

fn hyper_json(v: &HyperValue) -> serde_json::Value {
    match v {
        HyperValue::Int(i) => (*i).into(),
        HyperValue::Float(f) => (*f).into(),
        HyperValue::Str(s) => s.clone().into(),
    }
}

fn recommend(a: RecommendArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let f = fs::File::open(&a.weights).map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.weights.display())))?;
    let model = read_weights(std::io::BufReader::new(f))?;
    let d = read_dataset_csv(&a.data).map_err(|e| CliError::Data(format!("{}: {e}", a.data.display())))?;
    let o = realdata_pipeline(&d, &model, a.selector, &a.k_range.0, a.seed)?;
    let mut order: Vec<usize> = (0..o.scores.len()).collect();
    order.sort_by(|&i, &j| o.scores[j].total_cmp(&o.scores[i]).then(i.cmp(&j)));
    let rec = Recommendation {
        algorithm: o.algorithm.name().to_string(),
        k: o.k,
        hyperparams: o.spec.hyperparams.iter().map(|(k, v)| (k.clone(), hyper_json(v))).collect(),
        ranked: order.iter().map(|&i| Algorithm::ALL[i].name().to_string()).collect(),
        scores: o.scores,
        selector: a.selector,
        k_fallback: o.k_fallback,
        ari: o.ari,
    };
    writeln!(out, "{}", serde_json::to_string_pretty(&rec)?)?;
    Ok(())
}

fn report(a: ReportArgs, out: &mut dyn Write) -> Result<(), CliError> {
    let text = fs::read_to_string(&a.file).map_err(|e| CliError::Data(format!("cannot read {}: {e}", a.file.display())))?;
    let r: StoredReport = serde_json::from_str(&text).map_err(|_| CliError::Data(format!("{}: not an evaluation or ablation report", a.file.display())))?;
    if a.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&r)?)?;
        return Ok(());
    }
    match r {
        StoredReport::Evaluation(e) => write!(out, "{}", e.table())?,
        StoredReport::Ablation(rows) => write!(out, "{}", ablation_table(&rows))?,
    }
    Ok(())
}
