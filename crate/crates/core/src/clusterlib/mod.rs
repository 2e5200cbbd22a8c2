//! Ten clustering algorithms and the per-configuration grid search.
//!
//! Every algorithm is reached through [`cluster`] with an [`AlgorithmSpec`]
//! naming the algorithm, its hyperparameters, the requested cluster count
//! and a seed. All algorithms are deterministic for a fixed spec.

pub mod birch;
pub mod dbscan;
pub mod distance;
pub mod eigen;
pub mod gmm;
mod grid;
pub mod hdbscan;
pub mod hierarchical;
pub mod kmeans;
pub mod mst;
pub mod optics;
pub mod spectral;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::synthgen::Dataset;

pub use distance::{pairwise_distances, Metric};
pub use eigen::eigh_smallest;
pub use grid::{grid_search_by, grid_search_config, GridSearchResult, HyperparamGrid, GRID_FILE_JSON};
pub use mst::{minimum_spanning_tree, Edge, WeightedGraph};

#[derive(Debug, Error, PartialEq)]
pub enum ClusterError {
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("matrix is not symmetric")]
    NonSymmetric,
    #[error("graph is disconnected")]
    DisconnectedGraph,
    #[error("hyperparameter grid is empty")]
    EmptyGrid,
    #[error("dataset has no ground truth labels")]
    MissingTruth,
}

/// The ten algorithms, in the fixed column order used by ARI and label
/// matrices.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algorithm {
    KMeans,
    KMedians,
    Agglomerative,
    Ward,
    Birch,
    Dbscan,
    Hdbscan,
    Optics,
    Gmm,
    Spectral,
}

impl Algorithm {
    pub const ALL: [Algorithm; 10] = [
        Algorithm::KMeans,
        Algorithm::KMedians,
        Algorithm::Agglomerative,
        Algorithm::Ward,
        Algorithm::Birch,
        Algorithm::Dbscan,
        Algorithm::Hdbscan,
        Algorithm::Optics,
        Algorithm::Gmm,
        Algorithm::Spectral,
    ];

    pub fn index(self) -> usize {
        Algorithm::ALL.iter().position(|&a| a == self).unwrap()
    }

    pub fn from_index(i: usize) -> Option<Algorithm> {
        Algorithm::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::KMeans => "KMeans",
            Algorithm::KMedians => "KMedians",
            Algorithm::Agglomerative => "Agglomerative",
            Algorithm::Ward => "Ward",
            Algorithm::Birch => "BIRCH",
            Algorithm::Dbscan => "DBSCAN",
            Algorithm::Hdbscan => "HDBSCAN",
            Algorithm::Optics => "OPTICS",
            Algorithm::Gmm => "GMM",
            Algorithm::Spectral => "Spectral",
        }
    }

    /// Whether the algorithm takes the cluster count as input.
    pub fn takes_k(self) -> bool {
        !matches!(self, Algorithm::Dbscan | Algorithm::Hdbscan | Algorithm::Optics)
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ClusterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Algorithm::ALL
            .iter()
            .copied()
            .find(|a| a.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| ClusterError::InvalidSpec(format!("unknown algorithm {s:?}")))
    }
}

/// A hyperparameter value.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum HyperValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl HyperValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            HyperValue::Int(i) => Some(*i as f64),
            HyperValue::Float(f) => Some(*f),
            HyperValue::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            HyperValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl fmt::Display for HyperValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HyperValue::Int(i) => write!(f, "{i}"),
            HyperValue::Float(x) => write!(f, "{x}"),
            HyperValue::Str(s) => f.write_str(s),
        }
    }
}

/// Algorithm plus a concrete hyperparameter assignment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlgorithmSpec {
    pub algo: Algorithm,
    pub hyperparams: BTreeMap<String, HyperValue>,
    pub k_clusters: usize,
    #[serde(default)]
    pub seed: u64,
}

/// Desk-scale restart count for k-means style algorithms.
pub const DEFAULT_N_INIT: i64 = 10;

impl AlgorithmSpec {
    pub fn new(algo: Algorithm, k_clusters: usize) -> Self {
        AlgorithmSpec { algo, hyperparams: BTreeMap::new(), k_clusters, seed: 0 }
    }

    pub fn with(mut self, name: &str, value: HyperValue) -> Self {
        self.hyperparams.insert(name.to_string(), value);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn float(&self, name: &str, default: f64) -> Result<f64, ClusterError> {
        match self.hyperparams.get(name) {
            None => Ok(default),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| ClusterError::InvalidSpec(format!("{name} must be numeric"))),
        }
    }

    fn int(&self, name: &str, default: i64) -> Result<i64, ClusterError> {
        let v = self.float(name, default as f64)?;
        if v.fract() != 0.0 {
            return Err(ClusterError::InvalidSpec(format!("{name} must be an integer")));
        }
        Ok(v as i64)
    }

    fn string<'a>(&'a self, name: &str, default: &'a str) -> Result<&'a str, ClusterError> {
        match self.hyperparams.get(name) {
            None => Ok(default),
            Some(v) => v.as_str().ok_or_else(|| ClusterError::InvalidSpec(format!("{name} must be a string"))),
        }
    }

    /// Identity of the computation, ignoring metadata-only parameters.
    pub(crate) fn effective_key(&self) -> String {
        let params: Vec<String> = self
            .hyperparams
            .iter()
            .filter(|(k, _)| !(self.algo == Algorithm::Spectral && k.as_str() == "eigen_solver"))
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}|{}|{}|{}", self.algo, self.k_clusters, self.seed, params.join(","))
    }
}

/// Cluster labels; `-1` marks noise for the density-based algorithms and
/// the remaining labels are contiguous from 0 in order of first appearance.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PartitionLabels(Vec<i32>);

impl PartitionLabels {
    /// Canonicalise arbitrary labels (negative = noise).
    pub fn from_raw<T: Copy + Into<i64>>(raw: &[T]) -> Self {
        let mut map: BTreeMap<i64, i32> = BTreeMap::new();
        let mut out = Vec::with_capacity(raw.len());
        for &r in raw {
            let r: i64 = r.into();
            if r < 0 {
                out.push(-1);
                continue;
            }
            let next = map.len() as i32;
            out.push(*map.entry(r).or_insert(next));
        }
        PartitionLabels(out)
    }

    pub fn from_usize(raw: &[usize]) -> Self {
        let v: Vec<i64> = raw.iter().map(|&x| x as i64).collect();
        Self::from_raw(&v)
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<i32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn n_clusters(&self) -> usize {
        self.0.iter().copied().max().map_or(0, |m| (m + 1).max(0) as usize)
    }

    pub fn n_noise(&self) -> usize {
        self.0.iter().filter(|&&l| l < 0).count()
    }
}

/// Flags raised while clustering that do not abort the run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunFlags {
    /// GMM hit its iteration cap before reaching the tolerance.
    pub non_converged: bool,
    /// A cosine distance involved a zero vector.
    pub zero_vector_cosine: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClusterRun {
    pub labels: PartitionLabels,
    pub flags: RunFlags,
}

/// Anything that partitions a dataset.
pub trait Clusterer: Sync {
    fn name(&self) -> String;
    fn cluster(&self, d: &Dataset) -> Result<PartitionLabels, ClusterError>;
}

impl Clusterer for AlgorithmSpec {
    fn name(&self) -> String {
        self.algo.name().to_string()
    }

    fn cluster(&self, d: &Dataset) -> Result<PartitionLabels, ClusterError> {
        cluster(d, self)
    }
}

pub fn cluster(d: &Dataset, spec: &AlgorithmSpec) -> Result<PartitionLabels, ClusterError> {
    cluster_detailed(d, spec).map(|r| r.labels)
}

/// Dispatch to the algorithm named in `spec`.
pub fn cluster_detailed(d: &Dataset, spec: &AlgorithmSpec) -> Result<ClusterRun, ClusterError> {
    let x = &d.x;
    let n = x.rows();
    if n < 2 {
        return Err(ClusterError::DegenerateInput(format!("{n} rows")));
    }
    let k = spec.k_clusters;
    if spec.algo.takes_k() && (k == 0 || k > n) {
        return Err(ClusterError::InvalidSpec(format!("k = {k} with {n} rows")));
    }
    let mut flags = RunFlags::default();
    let labels = match spec.algo {
        Algorithm::KMeans | Algorithm::KMedians => {
            let n_init = spec.int("n_init", DEFAULT_N_INIT)?.max(1) as usize;
            let variant = if spec.algo == Algorithm::KMeans { kmeans::Variant::Means } else { kmeans::Variant::Medians };
            let fit = kmeans::fit(x, k, n_init, variant, spec.seed);
            PartitionLabels::from_usize(&fit.labels)
        }
        Algorithm::Agglomerative | Algorithm::Ward => {
            let neighbors = spec.int("neighbors", 5)?;
            if neighbors < 1 {
                return Err(ClusterError::InvalidSpec("neighbors must be positive".into()));
            }
            let (linkage, metric) = if spec.algo == Algorithm::Ward {
                (hierarchical::Linkage::Ward, Metric::Euclidean)
            } else {
                let linkage: hierarchical::Linkage = spec.string("linkage", "average")?.parse()?;
                if linkage == hierarchical::Linkage::Ward {
                    return Err(ClusterError::InvalidSpec("use the Ward algorithm for ward linkage".into()));
                }
                (linkage, spec.string("metric", "euclidean")?.parse()?)
            };
            if metric == Metric::Cosine && x.iter_rows().any(|r| r.iter().all(|&v| v == 0.0)) {
                flags.zero_vector_cosine = true;
            }
            let conn = hierarchical::Connectivity::Knn(neighbors as usize);
            PartitionLabels::from_usize(&hierarchical::agglomerate(x, k, linkage, metric, conn))
        }
        Algorithm::Birch => {
            let threshold = spec.float("threshold", 0.5)?;
            let branching = spec.int("branching_factor", 50)?;
            if threshold <= 0.0 || branching < 2 {
                return Err(ClusterError::InvalidSpec("bad BIRCH parameters".into()));
            }
            PartitionLabels::from_usize(&birch::fit(x, k, threshold, branching as usize))
        }
        Algorithm::Dbscan => {
            let eps = spec.float("eps", 0.5)?;
            let min_samples = spec.int("min_samples", 5)?;
            if eps <= 0.0 || min_samples < 1 {
                return Err(ClusterError::InvalidSpec("bad DBSCAN parameters".into()));
            }
            PartitionLabels::from_raw(&dbscan::fit(x, eps, min_samples as usize))
        }
        Algorithm::Hdbscan => {
            let mcs = spec.int("min_cluster_size", 5)?;
            let ms = spec.int("min_samples", mcs)?;
            if mcs < 2 || ms < 1 {
                return Err(ClusterError::InvalidSpec("bad HDBSCAN parameters".into()));
            }
            PartitionLabels::from_raw(&hdbscan::fit(x, ms as usize, mcs as usize))
        }
        Algorithm::Optics => {
            let ms = spec.int("min_samples", 5)?;
            let xi = spec.float("xi", 0.05)?;
            if ms < 2 || !(0.0..1.0).contains(&xi) || xi == 0.0 {
                return Err(ClusterError::InvalidSpec("bad OPTICS parameters".into()));
            }
            let ms = ms as usize;
            let mcs = match spec.hyperparams.get("min_cluster_size") {
                None => ms,
                Some(v) => optics::resolve_size(v.as_f64().unwrap_or(-1.0), n)?,
            };
            let ordering = optics::ordering(x, ms);
            PartitionLabels::from_raw(&optics::extract_xi(&ordering, ms, mcs, xi))
        }
        Algorithm::Gmm => {
            let cov: gmm::Covariance = spec.string("covariance", "full")?.parse()?;
            let fit = gmm::fit(x, k, cov, spec.seed);
            flags.non_converged = !fit.converged;
            PartitionLabels::from_usize(&fit.labels)
        }
        Algorithm::Spectral => {
            let affinity: spectral::Affinity = spec.string("affinity", "rbf")?.parse()?;
            let _solver = spec.string("eigen_solver", "arpack")?;
            let gamma = spec.float("gamma", 1.0 / x.cols() as f64)?;
            let nn = spec.int("n_neighbors", 10)?.max(1) as usize;
            PartitionLabels::from_usize(&spectral::fit(x, k, affinity, gamma, nn, spec.seed)?)
        }
    };
    Ok(ClusterRun { labels, flags })
}
