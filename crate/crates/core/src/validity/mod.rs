//! External and internal validity indices, multi-label scores and the
//! paired signed-rank test.

mod external;
mod internal;
mod multilabel;
mod wilcoxon;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use external::{ari, ContingencyTable};
pub use internal::{calinski_harabasz, davies_bouldin, dunn, silhouette, Cvi};
pub use multilabel::{f1_micro, f1_multilabel, f1_samples, hamming};
pub use wilcoxon::{wilcoxon_signed_rank, WilcoxonResult, EXACT_MAX_N};

#[derive(Debug, Error, PartialEq)]
pub enum ValidityError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least two points")]
    TooFewPoints,
    #[error("need at least two clusters")]
    SingleCluster,
    #[error("every cluster has zero within-cluster dispersion")]
    SingletonPartition,
    #[error("every cluster has zero diameter")]
    ZeroDiameter,
    #[error("bit matrices differ in shape")]
    ShapeMismatch,
    #[error("all paired differences are zero")]
    AllZeroDifferences,
}

/// Mean and population standard deviation.
pub fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64;
    (m, var.sqrt())
}

/// Summary of a prediction run: pooled scores plus per-fold spread.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub f1: f64,
    pub f1_samples: f64,
    pub hamming: f64,
    pub mean_ari: f64,
    pub fold_f1: Vec<f64>,
    pub fold_hamming: Vec<f64>,
    pub fold_ari: Vec<f64>,
}

impl MetricReport {
    pub fn f1_mean_std(&self) -> (f64, f64) {
        mean_std(&self.fold_f1)
    }

    pub fn hamming_mean_std(&self) -> (f64, f64) {
        mean_std(&self.fold_hamming)
    }

    pub fn ari_mean_std(&self) -> (f64, f64) {
        mean_std(&self.fold_ari)
    }
}
