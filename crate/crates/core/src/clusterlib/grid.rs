//! Hyperparameter grids and the per-configuration grid search.

use std::collections::{BTreeMap, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cluster, optics, Algorithm, AlgorithmSpec, ClusterError, HyperValue, PartitionLabels};
use crate::synthgen::Dataset;

/// The shipped grid file.
pub const GRID_FILE_JSON: &str = include_str!("../../grids/hyperparams.v1.json");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridParam {
    pub name: String,
    pub values: Vec<HyperValue>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmGrid {
    pub algo: Algorithm,
    pub params: Vec<GridParam>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HyperparamGrid {
    pub version: u32,
    pub algorithms: Vec<AlgorithmGrid>,
}

impl HyperparamGrid {
    /// The full grids from [`GRID_FILE_JSON`].
    pub fn shipped() -> Self {
        serde_json::from_str(GRID_FILE_JSON).expect("shipped grid file parses")
    }

    /// Shipped grids with the k-means restart count lowered to `n_init`.
    pub fn desk(n_init: i64) -> Self {
        let mut g = Self::shipped();
        for a in &mut g.algorithms {
            for p in &mut a.params {
                if p.name == "n_init" {
                    p.values = vec![HyperValue::Int(n_init)];
                }
            }
        }
        g
    }

    pub fn params(&self, algo: Algorithm) -> &[GridParam] {
        self.algorithms.iter().find(|a| a.algo == algo).map_or(&[], |a| &a.params)
    }

    /// Replace (or add) the grid of one algorithm.
    pub fn set(&mut self, algo: Algorithm, params: Vec<GridParam>) {
        match self.algorithms.iter_mut().find(|a| a.algo == algo) {
            Some(a) => a.params = params,
            None => self.algorithms.push(AlgorithmGrid { algo, params }),
        }
    }

    /// Cartesian product in declared order, the last parameter varying
    /// fastest. An algorithm without parameters yields one empty point; an
    /// algorithm missing from the grid or with an empty value list yields
    /// none.
    pub fn points(&self, algo: Algorithm) -> Vec<BTreeMap<String, HyperValue>> {
        let Some(a) = self.algorithms.iter().find(|a| a.algo == algo) else {
            return Vec::new();
        };
        let mut out = vec![BTreeMap::new()];
        for p in &a.params {
            let mut next = Vec::with_capacity(out.len() * p.values.len());
            for partial in &out {
                for v in &p.values {
                    let mut m: BTreeMap<String, HyperValue> = partial.clone();
                    m.insert(p.name.clone(), v.clone());
                    next.push(m);
                }
            }
            out = next;
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSearchResult {
    pub spec: AlgorithmSpec,
    pub best_score: f64,
    /// Mean score of every grid point, in grid order.
    pub scores: Vec<f64>,
}

fn truth_of(d: &Dataset) -> Result<Vec<i32>, ClusterError> {
    d.y_true.clone().ok_or(ClusterError::MissingTruth)
}

/// Grid point with the highest mean ARI over `datasets`; the earliest point
/// wins ties. Each dataset is clustered with its own true cluster count.
pub fn grid_search_config(
    datasets: &[Dataset],
    algo: Algorithm,
    grid: &HyperparamGrid,
    seed: u64,
) -> Result<GridSearchResult, ClusterError> {
    let truths: Vec<Vec<i32>> = datasets.iter().map(truth_of).collect::<Result<_, _>>()?;
    let ks: Vec<usize> = datasets.iter().map(|d| d.n_clusters().unwrap_or(1)).collect();
    grid_search_by(datasets, &ks, algo, grid, seed, |i, labels| {
        crate::validity::ari(&truths[i], labels.as_slice()).unwrap_or(f64::NEG_INFINITY)
    })
}

/// Grid search with an arbitrary score. `score(i, labels)` rates the
/// partition of `datasets[i]` clustered with `ks[i]` clusters; failed runs
/// score negative infinity.
pub fn grid_search_by<F>(
    datasets: &[Dataset],
    ks: &[usize],
    algo: Algorithm,
    grid: &HyperparamGrid,
    seed: u64,
    score: F,
) -> Result<GridSearchResult, ClusterError>
where
    F: Fn(usize, &PartitionLabels) -> f64 + Sync,
{
    let points = grid.points(algo);
    if points.is_empty() || datasets.is_empty() {
        return Err(ClusterError::EmptyGrid);
    }
    let specs: Vec<AlgorithmSpec> = points
        .into_iter()
        .map(|hp| AlgorithmSpec { algo, hyperparams: hp, k_clusters: ks[0], seed })
        .collect();

    // Points that differ only in metadata share one evaluation.
    let mut first_of: HashMap<String, usize> = HashMap::new();
    let mut unique = Vec::new();
    let alias: Vec<usize> = specs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            *first_of.entry(s.effective_key()).or_insert_with(|| {
                unique.push(i);
                unique.len() - 1
            })
        })
        .collect();

    let orderings: Vec<HashMap<usize, optics::Ordering>> = if algo == Algorithm::Optics {
        let ms: Vec<usize> = {
            let mut v: Vec<usize> = specs.iter().filter_map(|s| s.int("min_samples", 5).ok()).map(|m| m.max(2) as usize).collect();
            v.sort();
            v.dedup();
            v
        };
        datasets.par_iter().map(|d| ms.iter().map(|&m| (m, optics::ordering(&d.x, m))).collect()).collect()
    } else {
        Vec::new()
    };

    let run = |spec: &AlgorithmSpec, i: usize| -> Result<PartitionLabels, ClusterError> {
        let d = &datasets[i];
        let mut spec = spec.clone();
        spec.k_clusters = ks[i];
        if algo == Algorithm::Optics {
            let ms = spec.int("min_samples", 5)?;
            let xi = spec.float("xi", 0.05)?;
            if ms >= 2 && xi > 0.0 && xi < 1.0 && d.x.rows() >= 2 {
                let mcs = match spec.hyperparams.get("min_cluster_size") {
                    None => ms as usize,
                    Some(v) => optics::resolve_size(v.as_f64().unwrap_or(-1.0), d.x.rows())?,
                };
                let o = &orderings[i][&(ms as usize)];
                return Ok(PartitionLabels::from_raw(&optics::extract_xi(o, ms as usize, mcs, xi)));
            }
        }
        cluster(d, &spec)
    };

    let unique_scores: Vec<f64> = unique
        .par_iter()
        .map(|&p| {
            let total: f64 = (0..datasets.len())
                .map(|i| match run(&specs[p], i) {
                    Ok(l) => score(i, &l),
                    Err(_) => f64::NEG_INFINITY,
                })
                .sum();
            total / datasets.len() as f64
        })
        .collect();
    let scores: Vec<f64> = alias.iter().map(|&u| unique_scores[u]).collect();
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = i;
        }
    }
    Ok(GridSearchResult { spec: specs[best].clone(), best_score: scores[best], scores })
}
