//! HDBSCAN: mutual-reachability graph, its minimum spanning tree, the
//! single-linkage hierarchy condensed with `min_cluster_size`, and
//! excess-of-mass selection of flat clusters (the root is never selected).

use std::collections::BTreeMap;

use super::mst::{minimum_spanning_tree, UnionFind, WeightedGraph};
use crate::matrix::{euclidean, Matrix};

/// Distance to the `min_samples`-th nearest point, the point itself counted
/// first.
pub fn core_distances(dist: &Matrix, min_samples: usize) -> Vec<f64> {
    let n = dist.rows();
    (0..n)
        .map(|i| {
            let mut row = dist.row(i).to_vec();
            row.sort_by(|a, b| a.partial_cmp(b).unwrap());
            row[(min_samples.max(1) - 1).min(n - 1)]
        })
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Merge {
    left: usize,
    right: usize,
    dist: f64,
    size: usize,
}

// Row of the condensed tree: `child` is a point (< n) or a cluster id.
#[derive(Clone, Copy, Debug)]
struct Condensed {
    parent: usize,
    child: usize,
    lambda: f64,
    size: usize,
}

fn lambda_of(d: f64) -> f64 {
    if d > 0.0 {
        1.0 / d
    } else {
        f64::INFINITY
    }
}

fn single_linkage(n: usize, mut edges: Vec<super::mst::Edge>) -> Vec<Merge> {
    edges.sort_by(|a, b| a.weight.partial_cmp(&b.weight).unwrap());
    let mut uf = UnionFind::new(n);
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut size_of = vec![1usize; 2 * n];
    let mut merges = Vec::with_capacity(n - 1);
    for e in edges {
        let (ra, rb) = (uf.find(e.u), uf.find(e.v));
        let (na, nb) = (node_of[ra], node_of[rb]);
        uf.union(ra, rb);
        let r = uf.find(ra);
        let id = n + merges.len();
        size_of[id] = size_of[na] + size_of[nb];
        node_of[r] = id;
        merges.push(Merge { left: na, right: nb, dist: e.weight, size: size_of[id] });
    }
    merges
}

fn leaves_of(node: usize, n: usize, merges: &[Merge], out: &mut Vec<usize>) {
    let mut stack = vec![node];
    while let Some(v) = stack.pop() {
        if v < n {
            out.push(v);
        } else {
            let m = merges[v - n];
            stack.push(m.left);
            stack.push(m.right);
        }
    }
}

fn condense(n: usize, merges: &[Merge], min_cluster_size: usize) -> Vec<Condensed> {
    let root = n + merges.len() - 1;
    let size = |v: usize| if v < n { 1 } else { merges[v - n].size };
    let mut out = Vec::new();
    let mut next_label = n + 1;
    // (hierarchy node, condensed cluster label)
    let mut stack = vec![(root, n)];
    while let Some((node, label)) = stack.pop() {
        if node < n {
            continue;
        }
        let m = merges[node - n];
        let lambda = lambda_of(m.dist);
        let (ls, rs) = (size(m.left), size(m.right));
        match (ls >= min_cluster_size, rs >= min_cluster_size) {
            (true, true) => {
                for (child, s) in [(m.left, ls), (m.right, rs)] {
                    out.push(Condensed { parent: label, child: next_label, lambda, size: s });
                    stack.push((child, next_label));
                    next_label += 1;
                }
            }
            (true, false) | (false, true) => {
                let (big, small) = if ls >= min_cluster_size { (m.left, m.right) } else { (m.right, m.left) };
                let mut pts = Vec::new();
                leaves_of(small, n, merges, &mut pts);
                for p in pts {
                    out.push(Condensed { parent: label, child: p, lambda, size: 1 });
                }
                stack.push((big, label));
            }
            (false, false) => {
                let mut pts = Vec::new();
                leaves_of(node, n, merges, &mut pts);
                for p in pts {
                    out.push(Condensed { parent: label, child: p, lambda, size: 1 });
                }
            }
        }
    }
    out
}

pub fn fit(x: &Matrix, min_samples: usize, min_cluster_size: usize) -> Vec<i64> {
    let n = x.rows();
    if n < 2 || n < min_cluster_size {
        return vec![-1; n];
    }
    let mut dist = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(x.row(i), x.row(j));
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    let core = core_distances(&dist, min_samples);
    let mut g = WeightedGraph::new(n);
    for i in 0..n {
        for j in i + 1..n {
            g.add_edge(i, j, dist[(i, j)].max(core[i]).max(core[j]));
        }
    }
    let tree = minimum_spanning_tree(&g).expect("complete graph is connected");
    let merges = single_linkage(n, tree);
    let condensed = condense(n, &merges, min_cluster_size);

    let root = n;
    let mut birth: BTreeMap<usize, f64> = BTreeMap::new();
    birth.insert(root, 0.0);
    let mut parent_of: BTreeMap<usize, usize> = BTreeMap::new();
    for r in &condensed {
        if r.child > n {
            birth.insert(r.child, r.lambda);
            parent_of.insert(r.child, r.parent);
        }
    }
    let mut stability: BTreeMap<usize, f64> = birth.keys().map(|&c| (c, 0.0)).collect();
    for r in &condensed {
        let b = birth[&r.parent];
        let contrib = if r.lambda.is_finite() { (r.lambda - b) * r.size as f64 } else { f64::MAX / 1e6 };
        *stability.get_mut(&r.parent).unwrap() += contrib;
    }

    // Excess of mass, processed from the youngest cluster id upwards.
    let clusters: Vec<usize> = birth.keys().copied().filter(|&c| c != root).collect();
    let mut children: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (&c, &p) in &parent_of {
        children.entry(p).or_default().push(c);
    }
    let mut selected: BTreeMap<usize, bool> = clusters.iter().map(|&c| (c, true)).collect();
    let mut subtree: BTreeMap<usize, f64> = BTreeMap::new();
    for &c in clusters.iter().rev() {
        let kids = children.get(&c).cloned().unwrap_or_default();
        let kid_sum: f64 = kids.iter().map(|k| subtree[k]).sum();
        if !kids.is_empty() && kid_sum > stability[&c] {
            selected.insert(c, false);
            subtree.insert(c, kid_sum);
        } else {
            subtree.insert(c, stability[&c]);
            let mut stack = kids;
            while let Some(k) = stack.pop() {
                selected.insert(k, false);
                if let Some(g) = children.get(&k) {
                    stack.extend(g.iter().copied());
                }
            }
        }
    }

    let chosen: Vec<usize> = clusters.iter().copied().filter(|c| selected[c]).collect();
    let label_of: BTreeMap<usize, i64> = chosen.iter().enumerate().map(|(i, &c)| (c, i as i64)).collect();
    let mut labels = vec![-1i64; n];
    for r in &condensed {
        if r.child >= n {
            continue;
        }
        let mut c = r.parent;
        loop {
            if let Some(&l) = label_of.get(&c) {
                labels[r.child] = l;
                break;
            }
            match parent_of.get(&c) {
                Some(&p) => c = p,
                None => break,
            }
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterlib::PartitionLabels;
    use crate::rng::rng_from;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn blobs(seed: u64) -> (Matrix, Vec<usize>) {
        let mut rng = rng_from(seed);
        let mut rows = Vec::new();
        let mut truth = Vec::new();
        for (c, (cx, cy)) in [(0.0, 0.0), (8.0, 0.0), (0.0, 8.0)].iter().enumerate() {
            for _ in 0..30 {
                rows.push(vec![cx + 0.5 * rng.sample::<f64, _>(StandardNormal), cy + 0.5 * rng.sample::<f64, _>(StandardNormal)]);
                truth.push(c);
            }
        }
        (Matrix::from_rows(&rows), truth)
    }

    #[test]
    fn finds_three_blobs() {
        let (x, truth) = blobs(1);
        let l = PartitionLabels::from_raw(&fit(&x, 5, 10));
        assert_eq!(l.n_clusters(), 3);
        let ari = crate::validity::ari(&PartitionLabels::from_usize(&truth).into_vec(), l.as_slice()).unwrap();
        assert!(ari > 0.9, "{ari}");
    }

    #[test]
    fn too_small_is_all_noise() {
        let (x, _) = blobs(2);
        let l = fit(&x, 5, 200);
        assert!(l.iter().all(|&v| v == -1));
    }

    #[test]
    fn core_distance_counts_self() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![3.0]]);
        let mut d = Matrix::zeros(3, 3);
        for i in 0..3 {
            for j in 0..3 {
                d[(i, j)] = (x[(i, 0)] - x[(j, 0)]).abs();
            }
        }
        assert_eq!(core_distances(&d, 1), vec![0.0, 0.0, 0.0]);
        assert_eq!(core_distances(&d, 2), vec![1.0, 1.0, 2.0]);
    }
}
