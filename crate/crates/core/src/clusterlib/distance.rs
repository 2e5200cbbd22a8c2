use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ClusterError;
use crate::matrix::{euclidean, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    L1,
    L2,
    Manhattan,
    Cosine,
}

impl FromStr for Metric {
    type Err = ClusterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "euclidean" => Ok(Metric::Euclidean),
            "l1" => Ok(Metric::L1),
            "l2" => Ok(Metric::L2),
            "manhattan" => Ok(Metric::Manhattan),
            "cosine" => Ok(Metric::Cosine),
            _ => Err(ClusterError::InvalidSpec(format!("unknown metric {s:?}"))),
        }
    }
}

pub fn distance(a: &[f64], b: &[f64], metric: Metric) -> f64 {
    match metric {
        Metric::Euclidean | Metric::L2 => euclidean(a, b),
        Metric::L1 | Metric::Manhattan => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
        Metric::Cosine => {
            let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
            let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
            match (na == 0.0, nb == 0.0) {
                (true, true) => 0.0,
                (true, false) | (false, true) => 1.0,
                _ => {
                    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                    (1.0 - dot / (na * nb)).max(0.0)
                }
            }
        }
    }
}

/// Symmetric `N x N` distance matrix with an exact zero diagonal.
pub fn pairwise_distances(x: &Matrix, metric: Metric) -> Matrix {
    let n = x.rows();
    let mut d = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let v = distance(x.row(i), x.row(j), metric);
            d[(i, j)] = v;
            d[(j, i)] = v;
        }
    }
    d
}
