//! Gaussian mixture fitted by EM, initialised from a k-means partition.

use std::str::FromStr;

use super::kmeans::{self, Variant};
use super::ClusterError;
use crate::matrix::Matrix;

pub const REG_COVAR: f64 = 1e-6;
pub const MAX_ITER: usize = 100;
pub const TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Covariance {
    Full,
    Tied,
    Diagonal,
    Spherical,
}

impl FromStr for Covariance {
    type Err = ClusterError;
    fn from_str(s: &str) -> Result<Self, ClusterError> {
        match s.to_ascii_lowercase().as_str() {
            "full" => Ok(Covariance::Full),
            "tied" => Ok(Covariance::Tied),
            "diag" | "diagonal" => Ok(Covariance::Diagonal),
            "spherical" => Ok(Covariance::Spherical),
            other => Err(ClusterError::InvalidSpec(format!("unknown covariance type {other:?}"))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct GmmFit {
    pub labels: Vec<usize>,
    pub weights: Vec<f64>,
    pub means: Matrix,
    /// Mean per-sample log-likelihood after each E-step.
    pub loglik_trace: Vec<f64>,
    pub converged: bool,
}

struct Component {
    chol: Matrix,
    log_det: f64,
}

fn cholesky(a: &Matrix) -> Option<Matrix> {
    let d = a.rows();
    let mut l = Matrix::zeros(d, d);
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[(i, j)];
            for p in 0..j {
                s -= l[(i, p)] * l[(j, p)];
            }
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[(i, i)] = s.sqrt();
            } else {
                l[(i, j)] = s / l[(j, j)];
            }
        }
    }
    Some(l)
}

fn factor(mut cov: Matrix) -> Component {
    let d = cov.rows();
    let mut jitter = 0.0;
    loop {
        if let Some(chol) = cholesky(&cov) {
            let log_det = 2.0 * (0..d).map(|i| chol[(i, i)].ln()).sum::<f64>();
            return Component { chol, log_det };
        }
        let add = if jitter == 0.0 { REG_COVAR } else { jitter * 9.0 };
        for i in 0..d {
            cov[(i, i)] += add;
        }
        jitter += add;
    }
}

fn log_density(x: &[f64], mean: &[f64], c: &Component) -> f64 {
    let d = x.len();
    let mut z = vec![0.0; d];
    let mut q = 0.0;
    for i in 0..d {
        let mut s = x[i] - mean[i];
        for p in 0..i {
            s -= c.chol[(i, p)] * z[p];
        }
        z[i] = s / c.chol[(i, i)];
        q += z[i] * z[i];
    }
    -0.5 * (d as f64 * (2.0 * std::f64::consts::PI).ln() + c.log_det + q)
}

fn m_step(x: &Matrix, resp: &Matrix, cov_type: Covariance) -> (Vec<f64>, Matrix, Vec<Component>) {
    let (n, d) = (x.rows(), x.cols());
    let k = resp.cols();
    let nk: Vec<f64> = (0..k).map(|c| (0..n).map(|i| resp[(i, c)]).sum::<f64>() + 10.0 * f64::EPSILON).collect();
    let mut means = Matrix::zeros(k, d);
    for i in 0..n {
        for c in 0..k {
            let r = resp[(i, c)];
            if r != 0.0 {
                for j in 0..d {
                    means[(c, j)] += r * x[(i, j)];
                }
            }
        }
    }
    for c in 0..k {
        for j in 0..d {
            means[(c, j)] /= nk[c];
        }
    }
    let scatter = |c: usize| {
        let mut s = Matrix::zeros(d, d);
        for i in 0..n {
            let r = resp[(i, c)];
            if r == 0.0 {
                continue;
            }
            for a in 0..d {
                let da = x[(i, a)] - means[(c, a)];
                for b in 0..=a {
                    s[(a, b)] += r * da * (x[(i, b)] - means[(c, b)]);
                }
            }
        }
        for a in 0..d {
            for b in 0..a {
                s[(b, a)] = s[(a, b)];
            }
        }
        s
    };
    let covs: Vec<Matrix> = match cov_type {
        Covariance::Full => (0..k)
            .map(|c| {
                let mut s = scatter(c);
                s.as_mut_slice().iter_mut().for_each(|v| *v /= nk[c]);
                s
            })
            .collect(),
        Covariance::Tied => {
            let mut t = Matrix::zeros(d, d);
            for c in 0..k {
                let s = scatter(c);
                t.as_mut_slice().iter_mut().zip(s.as_slice()).for_each(|(a, b)| *a += b);
            }
            let total: f64 = nk.iter().sum();
            t.as_mut_slice().iter_mut().for_each(|v| *v /= total);
            vec![t; k]
        }
        Covariance::Diagonal | Covariance::Spherical => (0..k)
            .map(|c| {
                let mut var = vec![0.0; d];
                for i in 0..n {
                    let r = resp[(i, c)];
                    for j in 0..d {
                        let dv = x[(i, j)] - means[(c, j)];
                        var[j] += r * dv * dv;
                    }
                }
                var.iter_mut().for_each(|v| *v /= nk[c]);
                if cov_type == Covariance::Spherical {
                    let m = var.iter().sum::<f64>() / d as f64;
                    var.iter_mut().for_each(|v| *v = m);
                }
                let mut s = Matrix::zeros(d, d);
                for j in 0..d {
                    s[(j, j)] = var[j];
                }
                s
            })
            .collect(),
    };
    let comps = covs
        .into_iter()
        .map(|mut s| {
            for j in 0..d {
                s[(j, j)] += REG_COVAR;
            }
            factor(s)
        })
        .collect();
    let weights = nk.iter().map(|v| v / n as f64).collect();
    (weights, means, comps)
}

fn e_step(x: &Matrix, weights: &[f64], means: &Matrix, comps: &[Component]) -> (f64, Matrix) {
    let (n, k) = (x.rows(), weights.len());
    let mut resp = Matrix::zeros(n, k);
    let mut total = 0.0;
    for i in 0..n {
        let lp: Vec<f64> = (0..k).map(|c| weights[c].ln() + log_density(x.row(i), means.row(c), &comps[c])).collect();
        let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = m + lp.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
        total += lse;
        for c in 0..k {
            resp[(i, c)] = (lp[c] - lse).exp();
        }
    }
    (total / n as f64, resp)
}

pub fn fit(x: &Matrix, k: usize, cov_type: Covariance, seed: u64) -> GmmFit {
    let n = x.rows();
    let init = kmeans::fit(x, k, 1, Variant::Means, seed);
    let mut resp = Matrix::zeros(n, k);
    for (i, &l) in init.labels.iter().enumerate() {
        resp[(i, l)] = 1.0;
    }
    let (mut weights, mut means, mut comps) = m_step(x, &resp, cov_type);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut prev = f64::NEG_INFINITY;
    for _ in 0..MAX_ITER {
        let (ll, r) = e_step(x, &weights, &means, &comps);
        trace.push(ll);
        (weights, means, comps) = m_step(x, &r, cov_type);
        if (ll - prev).abs() < TOL {
            converged = true;
            break;
        }
        prev = ll;
    }
    let (_, r) = e_step(x, &weights, &means, &comps);
    resp = r;
    let labels = (0..n)
        .map(|i| {
            let row = resp.row(i);
            (0..k).fold(0, |b, c| if row[c] > row[b] { c } else { b })
        })
        .collect();
    GmmFit { labels, weights, means, loglik_trace: trace, converged }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::rng_from;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn two_gaussians(seed: u64) -> Matrix {
        let mut rng = rng_from(seed);
        let mut rows = Vec::new();
        for c in 0..2 {
            for _ in 0..60 {
                let s = if c == 0 { 0.5 } else { 2.0 };
                rows.push(vec![
                    c as f64 * 6.0 + s * rng.sample::<f64, _>(StandardNormal),
                    s * rng.sample::<f64, _>(StandardNormal),
                    0.3 * rng.sample::<f64, _>(StandardNormal),
                ]);
            }
        }
        Matrix::from_rows(&rows)
    }

    #[test]
    fn cholesky_roundtrip() {
        let a = Matrix::from_rows(&[vec![4.0, 2.0], vec![2.0, 3.0]]);
        let l = cholesky(&a).unwrap();
        let back = l.matmul(&l.transpose());
        for (p, q) in back.as_slice().iter().zip(a.as_slice()) {
            assert!((p - q).abs() < 1e-12);
        }
    }

    #[test]
    fn log_density_matches_univariate() {
        let c = factor(Matrix::from_rows(&[vec![4.0]]));
        let want = -0.5 * ((2.0 * std::f64::consts::PI).ln() + 4f64.ln() + 1.0);
        assert!((log_density(&[3.0], &[1.0], &c) - want).abs() < 1e-12);
    }

    #[test]
    fn loglik_non_decreasing_every_type() {
        for cov in [Covariance::Full, Covariance::Tied, Covariance::Diagonal, Covariance::Spherical] {
            for seed in 0..3 {
                let f = fit(&two_gaussians(seed), 3, cov, seed);
                for w in f.loglik_trace.windows(2) {
                    assert!(w[1] >= w[0] - 1e-9, "{cov:?} {w:?}");
                }
            }
        }
    }

    #[test]
    fn separates_two_gaussians() {
        let f = fit(&two_gaussians(7), 2, Covariance::Full, 1);
        assert!(f.converged);
        let truth: Vec<i32> = (0..120).map(|i| (i / 60) as i32).collect();
        let pred: Vec<i32> = f.labels.iter().map(|&l| l as i32).collect();
        assert!(crate::validity::ari(&truth, &pred).unwrap() > 0.9);
    }

    #[test]
    fn duplicated_points_stay_finite() {
        let x = Matrix::from_rows(&vec![vec![1.0, 1.0]; 10]);
        let f = fit(&x, 2, Covariance::Full, 0);
        assert!(f.means.is_finite());
        assert_eq!(f.labels.len(), 10);
    }

    #[test]
    fn parses_names() {
        assert_eq!("diagonal".parse::<Covariance>().unwrap(), Covariance::Diagonal);
        assert_eq!("diag".parse::<Covariance>().unwrap(), Covariance::Diagonal);
        assert!("banana".parse::<Covariance>().is_err());
    }
}
