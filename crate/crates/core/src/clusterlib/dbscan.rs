use crate::matrix::{euclidean, Matrix};

/// DBSCAN with euclidean distance. A point is core when at least
/// `min_samples` points (itself included) lie within `eps`. Core points
/// reachable from each other form clusters; a border point joins the
/// cluster of its nearest core neighbour, so the result does not depend on
/// row order. Noise is `-1`.
pub fn fit(x: &Matrix, eps: f64, min_samples: usize) -> Vec<i64> {
    let n = x.rows();
    let mut neigh: Vec<Vec<(f64, usize)>> = vec![Vec::new(); n];
    for i in 0..n {
        for j in 0..n {
            let d = euclidean(x.row(i), x.row(j));
            if d <= eps {
                neigh[i].push((d, j));
            }
        }
    }
    let core: Vec<bool> = neigh.iter().map(|nb| nb.len() >= min_samples).collect();
    let mut labels = vec![-1i64; n];
    let mut next = 0i64;
    for s in 0..n {
        if !core[s] || labels[s] >= 0 {
            continue;
        }
        labels[s] = next;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &(_, v) in &neigh[u] {
                if core[v] && labels[v] < 0 {
                    labels[v] = next;
                    stack.push(v);
                }
            }
        }
        next += 1;
    }
    for i in 0..n {
        if core[i] {
            continue;
        }
        let nearest = neigh[i]
            .iter()
            .filter(|&&(_, j)| core[j])
            .min_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        if let Some(&(_, j)) = nearest {
            labels[i] = labels[j];
        }
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterlib::PartitionLabels;

    #[test]
    fn blob_and_outlier() {
        let mut rows: Vec<Vec<f64>> = (0..6).map(|i| vec![i as f64 * 0.01, 0.0]).collect();
        rows.push(vec![50.0, 50.0]);
        let x = Matrix::from_rows(&rows);
        let l = fit(&x, 0.5, 3);
        assert!(l[..6].iter().all(|&v| v == 0));
        assert_eq!(l[6], -1);
    }

    #[test]
    fn border_points_join() {
        // core chain 0..4 spaced 0.4; a border point hangs off the end
        let mut rows: Vec<Vec<f64>> = (0..5).map(|i| vec![i as f64 * 0.4]).collect();
        rows.push(vec![2.05]);
        let x = Matrix::from_rows(&rows);
        let l = PartitionLabels::from_raw(&fit(&x, 0.5, 3));
        assert_eq!(l.n_clusters(), 1);
        assert_eq!(l.n_noise(), 0);
    }
}
