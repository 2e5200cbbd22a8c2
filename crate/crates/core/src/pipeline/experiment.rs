//! Cross-validated training and evaluation against the index baselines.

use serde::{Deserialize, Serialize};

use super::baseline::cvi_baseline;
use super::evaluate::{compare, evaluate_method, median, EvaluationReport, MethodEval};
use super::labels::{kfold_split, FoldPlan};
use super::realdata::{realdata_pipeline, Selector};
use super::repository::{Repository, N_ALGOS};
use super::PipelineError;
use crate::neuralnet::{cross_validate, predict, Ablation, ArchConfig, LearningCurves, Prediction, RecommenderNet, Sample, TrainConfig};
use crate::synthgen::Dataset;
use crate::validity::Cvi;

pub const MODEL: &str = "model";

#[derive(Clone, Debug)]
pub struct ExperimentResult {
    pub plan: FoldPlan,
    /// Out-of-fold scores of the model and the four index baselines.
    pub report: EvaluationReport,
    /// The best fold model on the held-out tenth.
    pub holdout: Option<MethodEval>,
    pub curves: LearningCurves,
    pub model: RecommenderNet,
}

/// Train with `cfg.folds`-fold cross-validation on all but a held-out tenth
/// and score out-of-fold predictions next to the index baselines.
pub fn run_experiment(repo: &Repository, samples: &[Sample], arch: &ArchConfig, cfg: &TrainConfig) -> Result<ExperimentResult, PipelineError> {
    if repo.is_empty() {
        return Err(PipelineError::EmptyRepository);
    }
    let plan = kfold_split(repo.len(), cfg.folds, cfg.seed)?;
    for f in 0..plan.folds.len() {
        let train = plan.train_indices(f);
        if plan.holdout.iter().any(|h| train.contains(h)) {
            return Err(PipelineError::Invariant("holdout row inside a training fold".into()));
        }
    }
    let cv_rows = plan.cv_indices();
    let local: Vec<Sample> = cv_rows.iter().map(|&i| samples[i].clone()).collect();
    let mut local_folds = Vec::with_capacity(plan.folds.len());
    let mut at = 0;
    for f in &plan.folds {
        local_folds.push((at..at + f.len()).collect::<Vec<usize>>());
        at += f.len();
    }
    let fold_of: Vec<usize> = plan.folds.iter().enumerate().flat_map(|(f, v)| std::iter::repeat(f).take(v.len())).collect();
    let out = cross_validate(arch, &local, &local_folds, cfg)?;

    let preds: Vec<Prediction> = out.oof_logits.iter().map(|l| Prediction::from_logits(l.as_ref().expect("every row is in a fold"))).collect();
    let bits: Vec<[bool; N_ALGOS]> = preds.iter().map(|p| to_bits(&p.binary)).collect();
    let selected: Vec<usize> = preds.iter().map(|p| p.recommended).collect();
    let mut methods = vec![evaluate_method(repo, MODEL, &cv_rows, &bits, &selected, &fold_of)?];

    for cvi in Cvi::ALL {
        let mut bits = Vec::with_capacity(cv_rows.len());
        let mut selected = Vec::with_capacity(cv_rows.len());
        for (f, test) in plan.folds.iter().enumerate() {
            let fit = cvi_baseline(repo, cvi, &plan.train_indices(f), test);
            bits.extend(fit.bits);
            selected.extend(fit.selected);
        }
        methods.push(evaluate_method(repo, cvi.short(), &cv_rows, &bits, &selected, &fold_of)?);
    }

    let model = out.fold_models[out.best_fold].clone();
    let holdout = if plan.holdout.is_empty() {
        None
    } else {
        let inputs: Vec<&[f64]> = plan.holdout.iter().map(|&i| samples[i].input.as_slice()).collect();
        let p = predict(&model, &inputs)?;
        let bits: Vec<[bool; N_ALGOS]> = p.iter().map(|p| to_bits(&p.binary)).collect();
        let sel: Vec<usize> = p.iter().map(|p| p.recommended).collect();
        Some(evaluate_method(repo, MODEL, &plan.holdout, &bits, &sel, &vec![0; plan.holdout.len()])?)
    };
    Ok(ExperimentResult { plan, report: compare(methods), holdout, curves: out.curves, model })
}

/// Score a trained model on the held-out tenth of the `seed` split, next to
/// index baselines fitted on the remaining rows.
pub fn evaluate_holdout(repo: &Repository, model: &RecommenderNet, folds: usize, seed: u64) -> Result<EvaluationReport, PipelineError> {
    if repo.is_empty() {
        return Err(PipelineError::EmptyRepository);
    }
    let plan = kfold_split(repo.len(), folds, seed)?;
    let rows = &plan.holdout;
    if rows.is_empty() {
        return Err(PipelineError::TooFewDatasets { n: repo.len(), k: folds });
    }
    let samples = repo.samples()?;
    let inputs: Vec<&[f64]> = rows.iter().map(|&i| samples[i].input.as_slice()).collect();
    let p = predict(model, &inputs)?;
    let bits: Vec<[bool; N_ALGOS]> = p.iter().map(|p| to_bits(&p.binary)).collect();
    let sel: Vec<usize> = p.iter().map(|p| p.recommended).collect();
    let one_fold = vec![0; rows.len()];
    let mut methods = vec![evaluate_method(repo, MODEL, rows, &bits, &sel, &one_fold)?];
    let train = plan.cv_indices();
    for cvi in Cvi::ALL {
        let fit = cvi_baseline(repo, cvi, &train, rows);
        methods.push(evaluate_method(repo, cvi.short(), rows, &fit.bits, &fit.selected, &one_fold)?);
    }
    Ok(compare(methods))
}

fn to_bits(v: &[bool]) -> [bool; N_ALGOS] {
    let mut b = [false; N_ALGOS];
    b.copy_from_slice(&v[..N_ALGOS]);
    b
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectorSummary {
    pub selector: Selector,
    pub ari: Vec<f64>,
    pub mean: f64,
    pub median: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Ablation,
    /// Out-of-fold selected-algorithm ARI on the repository.
    pub desk_mean: f64,
    pub desk_median: f64,
    /// Real-data protocol, one entry per selector (empty without real data).
    pub real: Vec<SelectorSummary>,
}

/// Train the four variants on identical folds and seed; score each on the
/// repository and, when given, on labelled real datasets.
pub fn run_ablations(
    repo: &Repository,
    samples: &[Sample],
    cfg: &TrainConfig,
    real: &[Dataset],
    k_range: &[usize],
) -> Result<(Vec<AblationRow>, Vec<ExperimentResult>), PipelineError> {
    let (_, h, w) = ArchConfig::default().in_shape;
    let (ph, pw) = repo.index.manifest.pad;
    let base = if (h, w) == (ph, pw) { ArchConfig::default() } else { ArchConfig::with_input(ph, pw) };
    let mut rows = Vec::new();
    let mut results = Vec::new();
    for v in Ablation::ALL {
        let r = run_experiment(repo, samples, &base.clone().ablated(v), cfg)?;
        rows.push(ablation_row(v, &r, real, k_range, cfg.seed)?);
        results.push(r);
    }
    Ok((rows, results))
}

pub fn ablation_row(variant: Ablation, r: &ExperimentResult, real: &[Dataset], k_range: &[usize], seed: u64) -> Result<AblationRow, PipelineError> {
    let m = r.report.method(MODEL).expect("model row");
    let mut summaries = Vec::new();
    if !real.is_empty() {
        for sel in [Selector::Ch, Selector::Sil] {
            let mut aris = Vec::new();
            for d in real {
                let o = realdata_pipeline(d, &r.model, sel, k_range, seed)?;
                aris.push(o.ari.ok_or(PipelineError::MissingTruth)?);
            }
            let mean = aris.iter().sum::<f64>() / aris.len() as f64;
            summaries.push(SelectorSummary { selector: sel, mean, median: median(&aris), ari: aris });
        }
    }
    Ok(AblationRow { variant, desk_mean: m.metrics.mean_ari, desk_median: m.median_ari(), real: summaries })
}
