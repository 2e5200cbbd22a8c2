//! Spectral clustering on the symmetric normalised Laplacian.

use std::str::FromStr;

use super::eigen::eigh_smallest;
use super::kmeans::{self, Variant};
use super::ClusterError;
use crate::matrix::{sq_euclidean, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Affinity {
    Rbf,
    NearestNeighbors,
}

impl FromStr for Affinity {
    type Err = ClusterError;
    fn from_str(s: &str) -> Result<Self, ClusterError> {
        match s.to_ascii_lowercase().as_str() {
            "rbf" => Ok(Affinity::Rbf),
            "nearest_neighbors" | "knn" => Ok(Affinity::NearestNeighbors),
            other => Err(ClusterError::InvalidSpec(format!("unknown affinity {other:?}"))),
        }
    }
}

/// Affinity matrix with a zero diagonal.
pub fn affinity_matrix(x: &Matrix, affinity: Affinity, gamma: f64, n_neighbors: usize) -> Matrix {
    let n = x.rows();
    let mut a = Matrix::zeros(n, n);
    match affinity {
        Affinity::Rbf => {
            for i in 0..n {
                for j in i + 1..n {
                    let v = (-gamma * sq_euclidean(x.row(i), x.row(j))).exp();
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
        }
        Affinity::NearestNeighbors => {
            let nn = n_neighbors.min(n - 1);
            for i in 0..n {
                let mut others: Vec<(f64, usize)> =
                    (0..n).filter(|&j| j != i).map(|j| (sq_euclidean(x.row(i), x.row(j)), j)).collect();
                others.sort_by(|p, q| p.partial_cmp(q).unwrap());
                for &(_, j) in &others[..nn] {
                    a[(i, j)] += 0.5;
                    a[(j, i)] += 0.5;
                }
            }
        }
    }
    a
}

/// Rows of the k smallest eigenvectors of I - D^-1/2 A D^-1/2, each row
/// scaled to unit length.
pub fn embedding(a: &Matrix, k: usize) -> Result<Matrix, ClusterError> {
    let n = a.rows();
    let inv_sqrt: Vec<f64> = (0..n)
        .map(|i| {
            let d: f64 = a.row(i).iter().sum();
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut l = Matrix::identity(n);
    for i in 0..n {
        for j in 0..n {
            l[(i, j)] -= inv_sqrt[i] * a[(i, j)] * inv_sqrt[j];
        }
    }
    let (_, mut v) = eigh_smallest(&l, k)?;
    for c in 0..k {
        let pivot = (0..n).fold(0, |b, r| if v[(r, c)].abs() > v[(b, c)].abs() { r } else { b });
        if v[(pivot, c)] < 0.0 {
            for r in 0..n {
                v[(r, c)] = -v[(r, c)];
            }
        }
    }
    for r in 0..n {
        let norm = v.row(r).iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            v.row_mut(r).iter_mut().for_each(|x| *x /= norm);
        }
    }
    Ok(v)
}

pub fn fit(x: &Matrix, k: usize, affinity: Affinity, gamma: f64, n_neighbors: usize, seed: u64) -> Result<Vec<usize>, ClusterError> {
    let a = affinity_matrix(x, affinity, gamma, n_neighbors);
    let emb = embedding(&a, k)?;
    Ok(kmeans::fit(&emb, k, super::DEFAULT_N_INIT as usize, Variant::Means, seed).labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rings() -> Matrix {
        let mut rows = Vec::new();
        for (r, m) in [(1.0, 40), (5.0, 80)] {
            for i in 0..m {
                let t = i as f64 / m as f64 * std::f64::consts::TAU;
                rows.push(vec![r * t.cos(), r * t.sin()]);
            }
        }
        Matrix::from_rows(&rows)
    }

    #[test]
    fn knn_affinity_separates_rings() {
        let l = fit(&rings(), 2, Affinity::NearestNeighbors, 0.5, 5, 0).unwrap();
        assert!(l[..40].iter().all(|&v| v == l[0]));
        assert!(l[40..].iter().all(|&v| v != l[0]));
    }

    #[test]
    fn affinity_symmetric_zero_diagonal() {
        for aff in [Affinity::Rbf, Affinity::NearestNeighbors] {
            let a = affinity_matrix(&rings(), aff, 0.5, 4);
            for i in 0..a.rows() {
                assert_eq!(a[(i, i)], 0.0);
                for j in 0..a.rows() {
                    assert_eq!(a[(i, j)], a[(j, i)]);
                }
            }
        }
    }

    #[test]
    fn embedding_rows_unit_length() {
        let a = affinity_matrix(&rings(), Affinity::Rbf, 0.5, 0);
        let e = embedding(&a, 3).unwrap();
        for r in e.iter_rows() {
            let norm: f64 = r.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-9);
        }
    }
}
