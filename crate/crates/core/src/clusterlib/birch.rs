//! BIRCH: a clustering-feature tree absorbs points into subclusters whose
//! radius stays below `threshold`; the subcluster centroids are then merged
//! to `k` clusters with Ward linkage and every point takes the label of its
//! closest subcluster.

use super::distance::Metric;
use super::hierarchical::{agglomerate, Connectivity, Linkage};
use crate::matrix::{sq_euclidean, Matrix};

#[derive(Clone, Debug)]
struct Cf {
    n: f64,
    ls: Vec<f64>,
    ss: f64,
}

impl Cf {
    fn point(p: &[f64]) -> Self {
        Cf { n: 1.0, ls: p.to_vec(), ss: p.iter().map(|v| v * v).sum() }
    }

    fn merge(&mut self, o: &Cf) {
        self.n += o.n;
        self.ls.iter_mut().zip(&o.ls).for_each(|(a, b)| *a += b);
        self.ss += o.ss;
    }

    fn centroid(&self) -> Vec<f64> {
        self.ls.iter().map(|v| v / self.n).collect()
    }

    fn radius_with(&self, o: &Cf) -> f64 {
        let n = self.n + o.n;
        let ss = self.ss + o.ss;
        let c2: f64 = self.ls.iter().zip(&o.ls).map(|(a, b)| ((a + b) / n).powi(2)).sum();
        (ss / n - c2).max(0.0).sqrt()
    }
}

#[derive(Clone, Debug)]
struct Entry {
    cf: Cf,
    child: Option<usize>,
}

#[derive(Clone, Debug)]
struct Node {
    entries: Vec<Entry>,
    leaf: bool,
}

struct Tree {
    nodes: Vec<Node>,
    root: usize,
    threshold: f64,
    branching: usize,
}

fn closest(entries: &[Entry], p: &[f64]) -> usize {
    let mut best = (f64::INFINITY, 0);
    for (i, e) in entries.iter().enumerate() {
        let d = sq_euclidean(&e.cf.centroid(), p);
        if d < best.0 {
            best = (d, i);
        }
    }
    best.1
}

impl Tree {
    // Returns the two halves when `node` had to split.
    fn insert(&mut self, node: usize, p: &Cf) -> Option<(Entry, Entry)> {
        let centroid = p.centroid();
        if self.nodes[node].leaf {
            let entries = &mut self.nodes[node].entries;
            if !entries.is_empty() {
                let i = closest(entries, &centroid);
                if entries[i].cf.radius_with(p) <= self.threshold {
                    entries[i].cf.merge(p);
                    return None;
                }
            }
            entries.push(Entry { cf: p.clone(), child: None });
        } else {
            let i = closest(&self.nodes[node].entries, &centroid);
            let child = self.nodes[node].entries[i].child.unwrap();
            match self.insert(child, p) {
                None => self.nodes[node].entries[i].cf.merge(p),
                Some((a, b)) => {
                    self.nodes[node].entries[i] = a;
                    self.nodes[node].entries.push(b);
                }
            }
        }
        if self.nodes[node].entries.len() > self.branching {
            Some(self.split(node))
        } else {
            None
        }
    }

    fn split(&mut self, node: usize) -> (Entry, Entry) {
        let leaf = self.nodes[node].leaf;
        let entries = std::mem::take(&mut self.nodes[node].entries);
        let cents: Vec<Vec<f64>> = entries.iter().map(|e| e.cf.centroid()).collect();
        let mut far = (-1.0, 0, 1);
        for i in 0..cents.len() {
            for j in i + 1..cents.len() {
                let d = sq_euclidean(&cents[i], &cents[j]);
                if d > far.0 {
                    far = (d, i, j);
                }
            }
        }
        let (mut left, mut right) = (Vec::new(), Vec::new());
        for (i, e) in entries.into_iter().enumerate() {
            if sq_euclidean(&cents[i], &cents[far.1]) <= sq_euclidean(&cents[i], &cents[far.2]) {
                left.push(e);
            } else {
                right.push(e);
            }
        }
        let summarize = |es: &[Entry]| {
            let mut cf = es[0].cf.clone();
            for e in &es[1..] {
                cf.merge(&e.cf);
            }
            cf
        };
        let (lcf, rcf) = (summarize(&left), summarize(&right));
        self.nodes[node] = Node { entries: left, leaf };
        self.nodes.push(Node { entries: right, leaf });
        let r = self.nodes.len() - 1;
        (Entry { cf: lcf, child: Some(node) }, Entry { cf: rcf, child: Some(r) })
    }

    fn leaves(&self, node: usize, out: &mut Vec<Vec<f64>>) {
        let n = &self.nodes[node];
        for e in &n.entries {
            match e.child {
                Some(c) if !n.leaf => self.leaves(c, out),
                _ => out.push(e.cf.centroid()),
            }
        }
    }
}

/// Centroids of the leaf subclusters built with `threshold`.
pub fn subclusters(x: &Matrix, threshold: f64, branching: usize) -> Vec<Vec<f64>> {
    let mut tree = Tree {
        nodes: vec![Node { entries: Vec::new(), leaf: true }],
        root: 0,
        threshold,
        branching,
    };
    for i in 0..x.rows() {
        let p = Cf::point(x.row(i));
        if let Some((a, b)) = tree.insert(tree.root, &p) {
            tree.nodes.push(Node { entries: vec![a, b], leaf: false });
            tree.root = tree.nodes.len() - 1;
        }
    }
    let mut out = Vec::new();
    tree.leaves(tree.root, &mut out);
    out
}

pub fn fit(x: &Matrix, k: usize, threshold: f64, branching: usize) -> Vec<usize> {
    let cents = subclusters(x, threshold, branching);
    let cm = Matrix::from_rows(&cents);
    let global = if cents.len() > k {
        agglomerate(&cm, k, Linkage::Ward, Metric::Euclidean, Connectivity::Full)
    } else {
        (0..cents.len()).collect()
    };
    (0..x.rows())
        .map(|i| {
            let row = x.row(i);
            let mut best = (f64::INFINITY, 0);
            for (s, c) in cents.iter().enumerate() {
                let d = sq_euclidean(row, c);
                if d < best.0 {
                    best = (d, s);
                }
            }
            global[best.1]
        })
        .collect()
}
