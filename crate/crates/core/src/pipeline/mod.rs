//! Repository construction, label derivation, cross-validated evaluation
//! against index baselines, ablations, and the real-data protocol.

mod baseline;
mod evaluate;
mod experiment;
mod labels;
mod manifest;
mod realdata;
mod repository;

#[cfg(test)]
mod tests;

use std::path::PathBuf;

use thiserror::Error;

pub use baseline::{cvi_baseline, oriented_values, threshold_baseline, ThresholdFit, N_THRESHOLDS};
pub use evaluate::{compare, evaluate_method, median, Confusion, EvaluationReport, MethodEval, WilcoxonRow};
pub use experiment::{ablation_row, evaluate_holdout, run_ablations, run_experiment, AblationRow, ExperimentResult, SelectorSummary, MODEL};
pub use labels::{argmax, derive_labels, kfold_split, FoldPlan, DEFAULT_TAU};
pub use manifest::{ConfigEntry, Generator, Manifest};
pub use realdata::{realdata_pipeline, RealDataOutcome, Selector, DEFAULT_K_RANGE};
pub use repository::{
    build_repository, checksums, generate_datasets, label_repository, load_repository, read_index, sha256_hex, write_if_changed, write_labels,
    DatasetEntry, RepoIndex, Repository, SpecChoice, WriteSummary, N_ALGOS,
};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration {config}: {source}")]
    Generation {
        config: String,
        #[source]
        source: crate::synthgen::SynthError,
    },
    #[error(transparent)]
    Synth(#[from] crate::synthgen::SynthError),
    #[error(transparent)]
    Cluster(#[from] crate::clusterlib::ClusterError),
    #[error(transparent)]
    Validity(#[from] crate::validity::ValidityError),
    #[error(transparent)]
    Nn(#[from] crate::neuralnet::NnError),
    #[error("need at least {k} datasets for {k} folds, got {n}")]
    TooFewDatasets { n: usize, k: usize },
    #[error("repository is empty")]
    EmptyRepository,
    #[error("dataset has no ground truth")]
    MissingTruth,
    #[error("checksum mismatch for dataset {0}")]
    Checksum(String),
    #[error("malformed repository: {0}")]
    Malformed(String),
    #[error("cannot read {0}: {1}")]
    MissingFile(PathBuf, std::io::Error),
    #[error("{0}")]
    Usage(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}
