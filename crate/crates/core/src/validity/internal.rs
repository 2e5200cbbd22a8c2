//! Internal indices on euclidean geometry. Points labelled -1 are left out.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ValidityError;
use crate::matrix::{euclidean, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Cvi {
    Silhouette,
    CalinskiHarabasz,
    DaviesBouldin,
    Dunn,
}

impl Cvi {
    pub const ALL: [Cvi; 4] = [Cvi::Silhouette, Cvi::CalinskiHarabasz, Cvi::DaviesBouldin, Cvi::Dunn];

    pub fn compute(self, x: &Matrix, labels: &[i32]) -> Result<f64, ValidityError> {
        match self {
            Cvi::Silhouette => silhouette(x, labels),
            Cvi::CalinskiHarabasz => calinski_harabasz(x, labels),
            Cvi::DaviesBouldin => davies_bouldin(x, labels),
            Cvi::Dunn => dunn(x, labels),
        }
    }

    pub fn higher_is_better(self) -> bool {
        self != Cvi::DaviesBouldin
    }

    pub fn short(self) -> &'static str {
        match self {
            Cvi::Silhouette => "sil",
            Cvi::CalinskiHarabasz => "ch",
            Cvi::DaviesBouldin => "db",
            Cvi::Dunn => "dunn",
        }
    }
}

impl fmt::Display for Cvi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short())
    }
}

impl FromStr for Cvi {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sil" | "silhouette" => Ok(Cvi::Silhouette),
            "ch" | "calinski_harabasz" | "calinski-harabasz" => Ok(Cvi::CalinskiHarabasz),
            "db" | "davies_bouldin" | "davies-bouldin" => Ok(Cvi::DaviesBouldin),
            "dunn" => Ok(Cvi::Dunn),
            other => Err(format!("unknown validity index {other:?}")),
        }
    }
}

// Non-noise rows grouped by cluster.
fn groups(x: &Matrix, labels: &[i32]) -> Result<Vec<Vec<usize>>, ValidityError> {
    if x.rows() != labels.len() {
        return Err(ValidityError::LengthMismatch(x.rows(), labels.len()));
    }
    let k = labels.iter().copied().max().unwrap_or(-1) + 1;
    let mut g = vec![Vec::new(); k.max(0) as usize];
    for (i, &l) in labels.iter().enumerate() {
        if l >= 0 {
            g[l as usize].push(i);
        }
    }
    g.retain(|c| !c.is_empty());
    if g.len() < 2 {
        return Err(ValidityError::SingleCluster);
    }
    Ok(g)
}

fn centroid(x: &Matrix, idx: &[usize]) -> Vec<f64> {
    let mut c = vec![0.0; x.cols()];
    for &i in idx {
        for (a, v) in c.iter_mut().zip(x.row(i)) {
            *a += v;
        }
    }
    c.iter_mut().for_each(|v| *v /= idx.len() as f64);
    c
}

/// Mean silhouette width; singletons score 0, as does a = b = 0.
pub fn silhouette(x: &Matrix, labels: &[i32]) -> Result<f64, ValidityError> {
    let g = groups(x, labels)?;
    let mut total = 0.0;
    let mut count = 0usize;
    for (ci, members) in g.iter().enumerate() {
        for &i in members {
            count += 1;
            if members.len() == 1 {
                continue;
            }
            let a = members.iter().map(|&j| euclidean(x.row(i), x.row(j))).sum::<f64>() / (members.len() - 1) as f64;
            let b = g
                .iter()
                .enumerate()
                .filter(|&(cj, _)| cj != ci)
                .map(|(_, other)| other.iter().map(|&j| euclidean(x.row(i), x.row(j))).sum::<f64>() / other.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let m = a.max(b);
            if m > 0.0 {
                total += (b - a) / m;
            }
        }
    }
    Ok(total / count as f64)
}

pub fn calinski_harabasz(x: &Matrix, labels: &[i32]) -> Result<f64, ValidityError> {
    let g = groups(x, labels)?;
    let all: Vec<usize> = g.iter().flatten().copied().collect();
    let n = all.len();
    let k = g.len();
    let mean = centroid(x, &all);
    let (mut between, mut within) = (0.0, 0.0);
    for members in &g {
        let c = centroid(x, members);
        between += members.len() as f64 * c.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        for &i in members {
            within += x.row(i).iter().zip(&c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
        }
    }
    if within == 0.0 {
        if between == 0.0 {
            return Ok(0.0);
        }
        return Err(ValidityError::SingletonPartition);
    }
    Ok(between * (n - k) as f64 / (within * (k - 1) as f64))
}

/// Lower is better; coincident centroids give +inf.
pub fn davies_bouldin(x: &Matrix, labels: &[i32]) -> Result<f64, ValidityError> {
    let g = groups(x, labels)?;
    let cents: Vec<Vec<f64>> = g.iter().map(|m| centroid(x, m)).collect();
    let scatter: Vec<f64> = g
        .iter()
        .zip(&cents)
        .map(|(m, c)| m.iter().map(|&i| euclidean(x.row(i), c)).sum::<f64>() / m.len() as f64)
        .collect();
    let k = g.len();
    let mut total = 0.0;
    for i in 0..k {
        let mut worst = 0.0f64;
        for j in 0..k {
            if i == j {
                continue;
            }
            let d = euclidean(&cents[i], &cents[j]);
            let r = if d == 0.0 { f64::INFINITY } else { (scatter[i] + scatter[j]) / d };
            worst = worst.max(r);
        }
        total += worst;
    }
    Ok(total / k as f64)
}

/// Smallest between-cluster point distance over largest cluster diameter.
pub fn dunn(x: &Matrix, labels: &[i32]) -> Result<f64, ValidityError> {
    let g = groups(x, labels)?;
    let mut diameter = 0.0f64;
    for m in &g {
        for (p, &i) in m.iter().enumerate() {
            for &j in &m[p + 1..] {
                diameter = diameter.max(euclidean(x.row(i), x.row(j)));
            }
        }
    }
    if diameter == 0.0 {
        return Err(ValidityError::ZeroDiameter);
    }
    let mut sep = f64::INFINITY;
    for a in 0..g.len() {
        for b in a + 1..g.len() {
            for &i in &g[a] {
                for &j in &g[b] {
                    sep = sep.min(euclidean(x.row(i), x.row(j)));
                }
            }
        }
    }
    Ok(sep / diameter)
}
