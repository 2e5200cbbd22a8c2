//! Bottom-up merging under a connectivity constraint.
//!
//! Cluster distances follow the Lance-Williams recurrences on the full
//! pairwise matrix; only clusters joined by an edge of the connectivity
//! graph may merge. The k-nearest-neighbour graph is symmetrised and, if it
//! falls apart, repaired with the shortest edges that bridge components.

use std::collections::BTreeSet;
use std::str::FromStr;

use super::distance::{pairwise_distances, Metric};
use super::ClusterError;
use crate::matrix::{sq_euclidean, Matrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Linkage {
    Single,
    Complete,
    Average,
    Ward,
}

impl FromStr for Linkage {
    type Err = ClusterError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "single" => Ok(Linkage::Single),
            "complete" => Ok(Linkage::Complete),
            "average" => Ok(Linkage::Average),
            "ward" => Ok(Linkage::Ward),
            _ => Err(ClusterError::InvalidSpec(format!("unknown linkage {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Connectivity {
    /// Any two clusters may merge.
    Full,
    /// Symmetrised k-nearest-neighbour graph (euclidean).
    Knn(usize),
}

/// Adjacency lists of the repaired, symmetrised kNN graph.
pub fn knn_graph(x: &Matrix, k: usize) -> Vec<BTreeSet<usize>> {
    let n = x.rows();
    let mut adj = vec![BTreeSet::new(); n];
    for i in 0..n {
        let mut order: Vec<(f64, usize)> =
            (0..n).filter(|&j| j != i).map(|j| (sq_euclidean(x.row(i), x.row(j)), j)).collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        for &(_, j) in order.iter().take(k) {
            adj[i].insert(j);
            adj[j].insert(i);
        }
    }
    connect_components(x, &mut adj);
    adj
}

fn components(adj: &[BTreeSet<usize>]) -> Vec<usize> {
    let n = adj.len();
    let mut comp = vec![usize::MAX; n];
    let mut next = 0;
    for s in 0..n {
        if comp[s] != usize::MAX {
            continue;
        }
        let mut stack = vec![s];
        comp[s] = next;
        while let Some(u) = stack.pop() {
            for &v in &adj[u] {
                if comp[v] == usize::MAX {
                    comp[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    comp
}

fn connect_components(x: &Matrix, adj: &mut [BTreeSet<usize>]) {
    loop {
        let comp = components(adj);
        if comp.iter().all(|&c| c == 0) {
            return;
        }
        let n = adj.len();
        let mut best = (f64::INFINITY, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                if comp[i] != comp[j] {
                    let d = sq_euclidean(x.row(i), x.row(j));
                    if d < best.0 {
                        best = (d, i, j);
                    }
                }
            }
        }
        adj[best.1].insert(best.2);
        adj[best.2].insert(best.1);
    }
}

/// Merge until `k` clusters remain. Returns one label per row.
pub fn agglomerate(x: &Matrix, k: usize, linkage: Linkage, metric: Metric, conn: Connectivity) -> Vec<usize> {
    let n = x.rows();
    let mut dist = if linkage == Linkage::Ward {
        let mut d = Matrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let v = sq_euclidean(x.row(i), x.row(j));
                d[(i, j)] = v;
                d[(j, i)] = v;
            }
        }
        d
    } else {
        pairwise_distances(x, metric)
    };
    let mut adj: Vec<BTreeSet<usize>> = match conn {
        Connectivity::Full => (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
        Connectivity::Knn(nn) if nn + 1 >= n => (0..n).map(|i| (0..n).filter(|&j| j != i).collect()).collect(),
        Connectivity::Knn(nn) => knn_graph(x, nn),
    };
    let mut size = vec![1usize; n];
    let mut active: BTreeSet<usize> = (0..n).collect();
    let mut owner: Vec<usize> = (0..n).collect();

    while active.len() > k {
        let mut best = (f64::INFINITY, usize::MAX, usize::MAX);
        for &i in &active {
            for &j in adj[i].range(i + 1..) {
                let d = dist[(i, j)];
                if d < best.0 {
                    best = (d, i, j);
                }
            }
        }
        let (dij, a, b) = best;
        if a == usize::MAX {
            break;
        }
        // merge b into a
        let (na, nb) = (size[a] as f64, size[b] as f64);
        for &c in &active {
            if c == a || c == b {
                continue;
            }
            let (dac, dbc) = (dist[(a, c)], dist[(b, c)]);
            let nc = size[c] as f64;
            let v = match linkage {
                Linkage::Single => dac.min(dbc),
                Linkage::Complete => dac.max(dbc),
                Linkage::Average => (na * dac + nb * dbc) / (na + nb),
                Linkage::Ward => ((na + nc) * dac + (nb + nc) * dbc - nc * dij) / (na + nb + nc),
            };
            dist[(a, c)] = v;
            dist[(c, a)] = v;
        }
        size[a] += size[b];
        active.remove(&b);
        let nb_adj = std::mem::take(&mut adj[b]);
        for c in nb_adj {
            adj[c].remove(&b);
            if c != a {
                adj[c].insert(a);
                adj[a].insert(c);
            }
        }
        adj[a].remove(&b);
        adj[a].remove(&a);
        for o in owner.iter_mut() {
            if *o == b {
                *o = a;
            }
        }
    }
    owner
}
