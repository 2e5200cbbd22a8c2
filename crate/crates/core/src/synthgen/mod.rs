//! Synthetic clustering datasets.
//!
//! Two generators are provided. [`gen_scenario1`] draws isotropic unit
//! Gaussian clusters around centres scattered with a separation scalar
//! `alpha`; [`calibrate_alpha`] searches the `alpha` grid for a setting in
//! which no algorithm dominates. [`gen_scenario2`] builds ellipsoidal
//! clusters with controlled aspect ratio, radius spread, size imbalance and
//! pairwise overlap.
//!
//! [`zscore_normalize`] and [`pad_to`] prepare a dataset for the network.

mod calibrate;
mod csvio;
mod overlap;
mod prep;
mod scenario1;
mod scenario2;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::Matrix;

pub use calibrate::{calibrate_alpha, verify_alpha, AlphaCalibration, AlphaCheck, Scenario1Base};
pub use csvio::{format_sig9, read_dataset_csv, read_dataset_str, write_dataset_csv};
pub use overlap::{estimate_overlap, pairwise_overlaps};
pub use prep::{fit_to, pad_to, zscore_normalize, PaddedTensorView, DEFAULT_PAD_H, DEFAULT_PAD_W};
pub use scenario1::gen_scenario1;
pub use scenario2::{cluster_sizes, gen_scenario2, gen_scenario2_with, Scenario2Options};

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("overlap calibration failed after {rounds} rounds")]
    CalibrationFailure { rounds: usize },
    #[error("no alpha on the grid satisfies the calibration predicates")]
    AlphaNotFound,
    #[error("dataset of shape {rows}x{cols} does not fit into {h}x{w}")]
    ShapeOverflow { rows: usize, cols: usize, h: usize, w: usize },
    #[error("malformed dataset: {0}")]
    Malformed(String),
    #[error(transparent)]
    Cluster(#[from] crate::clusterlib::ClusterError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Params {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub ne: usize,
    pub alpha: f64,
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadialLaw {
    Normal,
    Exponential,
    StudentT,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario2Params {
    pub k: usize,
    pub n: usize,
    pub d: usize,
    pub overlap_min: f64,
    pub overlap_max: f64,
    pub aspect_ratio: f64,
    pub radius_ratio: f64,
    pub distribution: RadialLaw,
    pub imbalance_ratio: f64,
    pub seed: u64,
}

/// Where a dataset came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Source {
    Scenario1(Scenario1Params),
    Scenario2(Scenario2Params),
    External { name: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub source: Source,
    /// Seed of the row subsample applied by [`fit_to`], if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subsample_seed: Option<u64>,
    /// Upper-triangular pairwise overlaps measured while placing centres
    /// (scenario 2 only), row-major over pairs `(i, j)` with `i < j`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overlaps: Option<Vec<f64>>,
}

impl Provenance {
    pub fn external(name: impl Into<String>) -> Self {
        Provenance { source: Source::External { name: name.into() }, subsample_seed: None, overlaps: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: Matrix,
    pub y_true: Option<Vec<i32>>,
    pub meta: Provenance,
}

impl Dataset {
    /// Validates finiteness and, when present, that labels are `0..K-1`
    /// with every cluster non-empty.
    pub fn new(x: Matrix, y_true: Option<Vec<i32>>, meta: Provenance) -> Result<Self, SynthError> {
        if !x.is_finite() {
            return Err(SynthError::Malformed("non-finite entry".into()));
        }
        if let Some(y) = &y_true {
            if y.len() != x.rows() {
                return Err(SynthError::Malformed(format!(
                    "{} labels for {} rows",
                    y.len(),
                    x.rows()
                )));
            }
            let k = y.iter().copied().max().map_or(0, |m| m + 1);
            if y.iter().any(|&l| l < 0) {
                return Err(SynthError::Malformed("negative ground-truth label".into()));
            }
            let mut seen = vec![false; k as usize];
            for &l in y {
                seen[l as usize] = true;
            }
            if seen.iter().any(|s| !s) {
                return Err(SynthError::Malformed("ground-truth labels are not contiguous".into()));
            }
        }
        Ok(Dataset { x, y_true, meta })
    }

    pub fn n_rows(&self) -> usize {
        self.x.rows()
    }

    pub fn n_cols(&self) -> usize {
        self.x.cols()
    }

    /// Number of ground-truth clusters, if labels are present.
    pub fn n_clusters(&self) -> Option<usize> {
        self.y_true.as_ref().map(|y| y.iter().copied().max().map_or(0, |m| m as usize + 1))
    }

    pub fn with_x(&self, x: Matrix) -> Dataset {
        Dataset { x, y_true: self.y_true.clone(), meta: self.meta.clone() }
    }
}

/// Shuffle rows of `x` together with `labels` using `rng`.
pub(crate) fn shuffle_rows(x: Matrix, labels: Vec<i32>, rng: &mut crate::rng::Rng) -> (Matrix, Vec<i32>) {
    use rand::seq::SliceRandom;
    let mut order: Vec<usize> = (0..x.rows()).collect();
    order.shuffle(rng);
    let y = order.iter().map(|&i| labels[i]).collect();
    (x.select_rows(&order), y)
}
