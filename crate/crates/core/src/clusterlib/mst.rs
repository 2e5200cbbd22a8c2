use serde::{Deserialize, Serialize};

use super::ClusterError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub u: usize,
    pub v: usize,
    pub weight: f64,
}

/// Undirected weighted graph as an edge list.
#[derive(Clone, Debug, Default)]
pub struct WeightedGraph {
    pub n: usize,
    pub edges: Vec<Edge>,
}

impl WeightedGraph {
    pub fn new(n: usize) -> Self {
        WeightedGraph { n, edges: Vec::new() }
    }

    pub fn add_edge(&mut self, u: usize, v: usize, weight: f64) {
        self.edges.push(Edge { u, v, weight });
    }
}

pub(crate) struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect(), rank: vec![0; n] }
    }

    pub(crate) fn find(&mut self, mut i: usize) -> usize {
        while self.parent[i] != i {
            self.parent[i] = self.parent[self.parent[i]];
            i = self.parent[i];
        }
        i
    }

    /// Returns false when already joined.
    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
        true
    }
}

/// Kruskal's algorithm; equal weights are broken by edge-list order.
/// The returned edges are in order of increasing weight.
pub fn minimum_spanning_tree(g: &WeightedGraph) -> Result<Vec<Edge>, ClusterError> {
    let mut order: Vec<usize> = (0..g.edges.len()).collect();
    order.sort_by(|&a, &b| g.edges[a].weight.partial_cmp(&g.edges[b].weight).unwrap().then(a.cmp(&b)));
    let mut uf = UnionFind::new(g.n);
    let mut tree = Vec::with_capacity(g.n.saturating_sub(1));
    for i in order {
        let e = g.edges[i];
        if uf.union(e.u, e.v) {
            tree.push(e);
            if tree.len() + 1 == g.n {
                break;
            }
        }
    }
    if g.n > 0 && tree.len() + 1 != g.n {
        return Err(ClusterError::DisconnectedGraph);
    }
    Ok(tree)
}
