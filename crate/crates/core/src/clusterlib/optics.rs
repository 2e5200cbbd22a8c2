//! OPTICS reachability ordering and xi-steep cluster extraction, following
//! the scikit-learn reference behaviour including its predecessor
//! correction.

use super::ClusterError;
use crate::matrix::{euclidean, Matrix};

#[derive(Clone, Debug)]
pub struct Ordering {
    pub order: Vec<usize>,
    /// Indexed by point, not by position in `order`.
    pub reachability: Vec<f64>,
    pub predecessor: Vec<i64>,
    pub core_distances: Vec<f64>,
}

/// `min_cluster_size` given as a fraction of n (<= 1) or an absolute count.
pub fn resolve_size(size: f64, n: usize) -> Result<usize, ClusterError> {
    if !(size > 0.0) || (size > 1.0 && size.fract() != 0.0) || size > n as f64 {
        return Err(ClusterError::InvalidSpec(format!("min_cluster_size {size} invalid for n={n}")));
    }
    if size <= 1.0 {
        Ok(((size * n as f64) as usize).max(2))
    } else {
        Ok(size as usize)
    }
}

pub fn ordering(x: &Matrix, min_samples: usize) -> Ordering {
    let n = x.rows();
    let mut dist = Matrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let d = euclidean(x.row(i), x.row(j));
            dist[(i, j)] = d;
            dist[(j, i)] = d;
        }
    }
    let core_distances = super::hdbscan::core_distances(&dist, min_samples);
    let mut reachability = vec![f64::INFINITY; n];
    let mut predecessor = vec![-1i64; n];
    let mut processed = vec![false; n];
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        let mut point = usize::MAX;
        for i in 0..n {
            if !processed[i] && (point == usize::MAX || reachability[i] < reachability[point]) {
                point = i;
            }
        }
        processed[point] = true;
        order.push(point);
        let cd = core_distances[point];
        for j in 0..n {
            if processed[j] {
                continue;
            }
            let r = dist[(point, j)].max(cd);
            if r < reachability[j] {
                reachability[j] = r;
                predecessor[j] = point as i64;
            }
        }
    }
    Ordering { order, reachability, predecessor, core_distances }
}

#[derive(Clone, Copy, Debug)]
struct SteepDown {
    start: usize,
    end: usize,
    mib: f64,
}

fn update_filter(sdas: Vec<SteepDown>, mib: f64, xi_c: f64, r: &[f64]) -> Vec<SteepDown> {
    if mib.is_infinite() {
        return Vec::new();
    }
    sdas.into_iter()
        .filter(|s| mib <= r[s.start] * xi_c)
        .map(|mut s| {
            s.mib = s.mib.max(mib);
            s
        })
        .collect()
}

fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_samples: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for i in start..steep.len() {
        if steep[i] {
            non_xward = 0;
            end = i;
        } else if !xward[i] {
            non_xward += 1;
            if non_xward > min_samples {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn correct_predecessor(r: &[f64], pred: &[i64], order: &[usize], s: usize, mut e: usize) -> Option<(usize, usize)> {
    while s < e {
        if r[s] > r[e] {
            return Some((s, e));
        }
        let p = pred[e];
        if order[s..e].iter().any(|&o| o as i64 == p) {
            return Some((s, e));
        }
        e -= 1;
    }
    None
}

/// Clusters as inclusive ranges over positions in the ordering, smaller
/// nested ones first.
fn xi_clusters(o: &Ordering, xi: f64, min_samples: usize, min_cluster_size: usize) -> Vec<(usize, usize)> {
    let n = o.order.len();
    let mut r: Vec<f64> = o.order.iter().map(|&i| o.reachability[i]).collect();
    r.push(f64::INFINITY);
    let pred: Vec<i64> = o.order.iter().map(|&i| o.predecessor[i]).collect();
    let xi_c = 1.0 - xi;
    let ratio: Vec<f64> = (0..n).map(|i| r[i] / r[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&q| q <= xi_c).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&q| q >= 1.0 / xi_c).collect();
    let down: Vec<bool> = ratio.iter().map(|&q| q > 1.0).collect();
    let up: Vec<bool> = ratio.iter().map(|&q| q < 1.0).collect();

    let mut sdas: Vec<SteepDown> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0usize;
    let mut mib = 0.0f64;
    for steep in 0..n {
        if !(steep_up[steep] || steep_down[steep]) || steep < index {
            continue;
        }
        mib = r[index..=steep].iter().fold(mib, |a, &b| a.max(b));
        sdas = update_filter(sdas, mib, xi_c, &r);
        if steep_down[steep] {
            let end = extend_region(&steep_down, &up, steep, min_samples);
            sdas.push(SteepDown { start: steep, end, mib: 0.0 });
            index = end + 1;
            mib = r[index];
            continue;
        }
        let u_start = steep;
        let u_end = extend_region(&steep_up, &down, u_start, min_samples);
        index = u_end + 1;
        mib = r[index];
        let mut found = Vec::new();
        for d in &sdas {
            let mut c_start = d.start;
            let mut c_end = u_end;
            if r[c_end + 1] * xi_c < d.mib {
                continue;
            }
            let d_max = r[d.start];
            if d_max * xi_c >= r[c_end + 1] {
                while r[c_start + 1] > r[c_end + 1] && c_start < d.end {
                    c_start += 1;
                }
            } else if r[c_end + 1] * xi_c >= d_max {
                while r[c_end - 1] > d_max && c_end > u_start {
                    c_end -= 1;
                }
            }
            let Some((s, e)) = correct_predecessor(&r, &pred, &o.order, c_start, c_end) else {
                continue;
            };
            if e - s + 1 < min_cluster_size || s > d.end || e < u_start {
                continue;
            }
            found.push((s, e));
        }
        found.reverse();
        clusters.extend(found);
    }
    clusters
}

pub fn extract_xi(o: &Ordering, min_samples: usize, min_cluster_size: usize, xi: f64) -> Vec<i64> {
    let n = o.order.len();
    let clusters = xi_clusters(o, xi, min_samples, min_cluster_size);
    let mut by_pos = vec![-1i64; n];
    let mut label = 0;
    for (s, e) in clusters {
        if by_pos[s..=e].iter().all(|&l| l == -1) {
            by_pos[s..=e].iter_mut().for_each(|l| *l = label);
            label += 1;
        }
    }
    let mut labels = vec![-1i64; n];
    for (pos, &p) in o.order.iter().enumerate() {
        labels[p] = by_pos[pos];
    }
    labels
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clusterlib::PartitionLabels;

    #[test]
    fn size_resolution() {
        assert_eq!(resolve_size(0.1, 100).unwrap(), 10);
        assert_eq!(resolve_size(0.01, 100).unwrap(), 2);
        assert_eq!(resolve_size(7.0, 100).unwrap(), 7);
        assert!(resolve_size(2.5, 100).is_err());
        assert!(resolve_size(0.0, 100).is_err());
        assert!(resolve_size(101.0, 100).is_err());
    }

    #[test]
    fn ordering_is_a_permutation_starting_at_zero() {
        let x = Matrix::from_rows(&[vec![5.0], vec![0.0], vec![0.1], vec![5.1], vec![0.2]]);
        let o = ordering(&x, 2);
        assert_eq!(o.order[0], 0);
        let mut s = o.order.clone();
        s.sort();
        assert_eq!(s, vec![0, 1, 2, 3, 4]);
        assert!(o.reachability[0].is_infinite());
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![-1.0], vec![2.0], vec![-2.0]]);
        let o = ordering(&x, 1);
        assert_eq!(o.order, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn two_dense_runs() {
        let mut rows = Vec::new();
        for i in 0..20 {
            rows.push(vec![i as f64 * 0.05]);
        }
        for i in 0..20 {
            rows.push(vec![10.0 + i as f64 * 0.05]);
        }
        let x = Matrix::from_rows(&rows);
        let o = ordering(&x, 3);
        let l = PartitionLabels::from_raw(&extract_xi(&o, 3, 5, 0.05));
        assert_eq!(l.n_clusters(), 2);
        assert_ne!(l.as_slice()[0], l.as_slice()[39]);
    }
}
