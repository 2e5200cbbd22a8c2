//! Recommendation for a single unlabeled dataset.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::clusterlib::{cluster, grid_search_by, Algorithm, AlgorithmSpec, HyperparamGrid};
use crate::neuralnet::{predict, RecommenderNet};
use crate::synthgen::{fit_to, zscore_normalize, Dataset};
use crate::validity::{ari, Cvi};

/// Index used to choose the cluster count and hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    Ch,
    Sil,
}

impl Selector {
    pub fn cvi(self) -> Cvi {
        match self {
            Selector::Ch => Cvi::CalinskiHarabasz,
            Selector::Sil => Cvi::Silhouette,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Selector::Ch => "ch",
            Selector::Sil => "sil",
        }
    }
}

impl FromStr for Selector {
    type Err = PipelineError;
    fn from_str(s: &str) -> Result<Self, PipelineError> {
        match s.to_ascii_lowercase().as_str() {
            "ch" => Ok(Selector::Ch),
            "sil" => Ok(Selector::Sil),
            _ => Err(PipelineError::Usage(format!("unknown selector {s:?} (expected ch or sil)"))),
        }
    }
}

pub const DEFAULT_K_RANGE: std::ops::RangeInclusive<usize> = 2..=10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RealDataOutcome {
    pub algorithm: Algorithm,
    pub k: usize,
    pub spec: AlgorithmSpec,
    /// Sigmoid score per algorithm, in the fixed algorithm order.
    pub scores: Vec<f64>,
    /// Selector value at each candidate k (`None` when undefined).
    pub k_scores: Vec<(usize, Option<f64>)>,
    pub labels: Vec<i32>,
    pub ari: Option<f64>,
    /// The selector was undefined for every k and the median k was used.
    pub k_fallback: bool,
    /// The hyperparameter search found no point with a defined selector value.
    pub search_fallback: bool,
}

/// Predict an algorithm, pick k by the selector, tune hyperparameters by
/// the selector, and cluster.
pub fn realdata_pipeline(
    d: &Dataset,
    model: &RecommenderNet,
    selector: Selector,
    k_range: &[usize],
    seed: u64,
) -> Result<RealDataOutcome, PipelineError> {
    if k_range.is_empty() || k_range.contains(&0) {
        return Err(PipelineError::Usage("k range must be non-empty and positive".into()));
    }
    let z = zscore_normalize(d);
    let (_, h, w) = model.arch.in_shape;
    let (_, view) = fit_to(&z, h, w, seed)?;
    let pred = predict(model, &[view.data.as_slice()])?.remove(0);
    let algo = Algorithm::from_index(pred.recommended).expect("ten classes");
    let cvi = selector.cvi();
    let score = |labels: &[i32]| cvi.compute(&z.x, labels).ok().filter(|v| v.is_finite());

    let mut k_scores = Vec::with_capacity(k_range.len());
    for &k in k_range {
        let s = cluster(&z, &AlgorithmSpec::new(algo, k).with_seed(seed)).ok().and_then(|l| score(l.as_slice()));
        k_scores.push((k, s));
    }
    let best = k_scores.iter().filter_map(|&(k, s)| s.map(|s| (k, s))).fold(None, |acc: Option<(usize, f64)>, (k, s)| match acc {
        Some((_, bs)) if bs >= s => acc,
        _ => Some((k, s)),
    });
    let (k, k_fallback) = match best {
        Some((k, _)) => (k, false),
        None => {
            let mut sorted = k_range.to_vec();
            sorted.sort_unstable();
            (sorted[(sorted.len() - 1) / 2], true)
        }
    };

    let grid = HyperparamGrid::desk(crate::clusterlib::DEFAULT_N_INIT);
    let searched = grid_search_by(std::slice::from_ref(&z), &[k], algo, &grid, seed, |_, l| score(l.as_slice()).unwrap_or(f64::NEG_INFINITY));
    let (spec, search_fallback) = match searched {
        Ok(r) if r.best_score.is_finite() => (r.spec, false),
        _ => (AlgorithmSpec::new(algo, k).with_seed(seed), true),
    };
    let labels = cluster(&z, &spec)?.as_slice().to_vec();
    let ari = match &d.y_true {
        Some(t) => Some(ari(t, &labels)?),
        None => None,
    };
    Ok(RealDataOutcome { algorithm: algo, k, spec, scores: pred.scores, k_scores, labels, ari, k_fallback, search_fallback })
}
