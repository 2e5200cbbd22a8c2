//! Lloyd iterations with k-means++ seeding, for means (squared euclidean)
//! and per-coordinate medians (l1).

use rand::Rng;

use crate::matrix::{sq_euclidean, Matrix};
use crate::rng::{rng_for, Rng as ChaRng};

pub const MAX_ITER: usize = 300;
pub const TOL: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Means,
    Medians,
}

#[derive(Clone, Debug)]
pub struct KMeansFit {
    pub labels: Vec<usize>,
    pub centers: Matrix,
    pub inertia: f64,
    /// Objective after every Lloyd iteration of the winning restart.
    pub trace: Vec<f64>,
}

fn cost(a: &[f64], b: &[f64], v: Variant) -> f64 {
    match v {
        Variant::Means => sq_euclidean(a, b),
        Variant::Medians => a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum(),
    }
}

/// k-means++ seeding. Stops early when every remaining point coincides with
/// a chosen centre, so fewer than `k` centres may come back.
pub fn plus_plus(x: &Matrix, k: usize, rng: &mut ChaRng) -> Matrix {
    let n = x.rows();
    let mut chosen = vec![rng.gen_range(0..n)];
    let mut d2: Vec<f64> = (0..n).map(|i| sq_euclidean(x.row(i), x.row(chosen[0]))).collect();
    while chosen.len() < k {
        let total: f64 = d2.iter().sum();
        if total <= 0.0 {
            break;
        }
        let mut r = rng.gen::<f64>() * total;
        let mut pick = n - 1;
        for (i, &w) in d2.iter().enumerate() {
            if w <= 0.0 {
                continue;
            }
            if r < w {
                pick = i;
                break;
            }
            r -= w;
        }
        if d2[pick] <= 0.0 {
            pick = d2.iter().rposition(|&w| w > 0.0).unwrap();
        }
        chosen.push(pick);
        for i in 0..n {
            d2[i] = d2[i].min(sq_euclidean(x.row(i), x.row(pick)));
        }
    }
    x.select_rows(&chosen)
}

fn assign(x: &Matrix, centers: &Matrix, v: Variant, labels: &mut [usize]) -> f64 {
    let mut total = 0.0;
    for i in 0..x.rows() {
        let row = x.row(i);
        let mut best = (f64::INFINITY, 0);
        for c in 0..centers.rows() {
            let d = cost(row, centers.row(c), v);
            if d < best.0 {
                best = (d, c);
            }
        }
        labels[i] = best.1;
        total += best.0;
    }
    total
}

fn median(vals: &mut [f64]) -> f64 {
    vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let m = vals.len();
    if m % 2 == 1 {
        vals[m / 2]
    } else {
        0.5 * (vals[m / 2 - 1] + vals[m / 2])
    }
}

fn update(x: &Matrix, labels: &[usize], k: usize, v: Variant, old: &Matrix) -> Matrix {
    let d = x.cols();
    let mut centers = old.clone();
    for c in 0..k {
        let members: Vec<usize> = (0..x.rows()).filter(|&i| labels[i] == c).collect();
        if members.is_empty() {
            continue;
        }
        for j in 0..d {
            let mut col: Vec<f64> = members.iter().map(|&i| x[(i, j)]).collect();
            centers[(c, j)] = match v {
                Variant::Means => col.iter().sum::<f64>() / col.len() as f64,
                Variant::Medians => median(&mut col),
            };
        }
    }
    centers
}

// Move the point farthest from its centre into each empty cluster.
fn relocate_empty(x: &Matrix, centers: &mut Matrix, labels: &mut [usize], v: Variant) {
    let k = centers.rows();
    for c in 0..k {
        if labels.iter().any(|&l| l == c) {
            continue;
        }
        let mut far = (f64::NEG_INFINITY, usize::MAX);
        for i in 0..x.rows() {
            let owner = labels[i];
            if labels.iter().filter(|&&l| l == owner).count() < 2 {
                continue;
            }
            let d = cost(x.row(i), centers.row(owner), v);
            if d > far.0 {
                far = (d, i);
            }
        }
        if far.1 == usize::MAX || far.0 <= 0.0 {
            continue;
        }
        labels[far.1] = c;
        centers.row_mut(c).copy_from_slice(x.row(far.1));
    }
}

/// One restart of Lloyd's algorithm from `centers`.
pub fn lloyd(x: &Matrix, mut centers: Matrix, v: Variant) -> KMeansFit {
    let n = x.rows();
    let k = centers.rows();
    let mean_var = {
        let mut s = 0.0;
        for j in 0..x.cols() {
            let col = x.column(j);
            let m = col.iter().sum::<f64>() / n as f64;
            s += col.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n as f64;
        }
        s / x.cols() as f64
    };
    let tol = TOL * mean_var;
    let mut labels = vec![0; n];
    let mut trace = Vec::new();
    assign(x, &centers, v, &mut labels);
    for _ in 0..MAX_ITER {
        relocate_empty(x, &mut centers, &mut labels, v);
        let new = update(x, &labels, k, v, &centers);
        let shift: f64 = (0..k).map(|c| sq_euclidean(new.row(c), centers.row(c))).sum();
        centers = new;
        let inertia = assign(x, &centers, v, &mut labels);
        trace.push(inertia);
        if shift <= tol {
            break;
        }
    }
    let inertia = *trace.last().unwrap();
    KMeansFit { labels, centers, inertia, trace }
}

/// Best of `n_init` seeded restarts (lowest objective, earliest on ties).
pub fn fit(x: &Matrix, k: usize, n_init: usize, v: Variant, seed: u64) -> KMeansFit {
    let mut best: Option<KMeansFit> = None;
    for run in 0..n_init.max(1) {
        let mut rng = rng_for(seed, "kmeans-init", run as u64);
        let centers = plus_plus(x, k, &mut rng);
        let fit = lloyd(x, centers, v);
        if best.as_ref().map_or(true, |b| fit.inertia < b.inertia) {
            best = Some(fit);
        }
    }
    best.unwrap()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn blobs() -> Matrix {
        let mut rows = Vec::new();
        for c in 0..3 {
            for i in 0..20 {
                let t = i as f64 * 0.3;
                rows.push(vec![10.0 * c as f64 + t.sin(), -5.0 * c as f64 + t.cos()]);
            }
        }
        Matrix::from_rows(&rows)
    }

    #[test]
    fn inertia_never_increases() {
        let x = blobs();
        for seed in 0..20 {
            for v in [Variant::Means, Variant::Medians] {
                let mut rng = rng_for(seed, "t", 0);
                let fit = lloyd(&x, plus_plus(&x, 4, &mut rng), v);
                for w in fit.trace.windows(2) {
                    assert!(w[1] <= w[0] + 1e-9, "{:?}", fit.trace);
                }
            }
        }
    }

    #[test]
    fn duplicates_limit_centres() {
        let x = Matrix::from_rows(&[vec![1.0, 1.0], vec![1.0, 1.0], vec![2.0, 2.0]]);
        let mut rng = rng_for(0, "t", 0);
        assert_eq!(plus_plus(&x, 3, &mut rng).rows(), 2);
    }

    #[test]
    fn medians_use_coordinate_median() {
        let x = Matrix::from_rows(&[vec![0.0], vec![1.0], vec![100.0]]);
        let fit = lloyd(&x, Matrix::from_rows(&[vec![1.0]]), Variant::Medians);
        assert_eq!(fit.centers[(0, 0)], 1.0);
        assert_eq!(fit.inertia, 100.0);
    }
}
