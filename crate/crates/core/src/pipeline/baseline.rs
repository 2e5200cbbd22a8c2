//! Threshold baselines built from internal validity indices.

use serde::{Deserialize, Serialize};

use super::labels::argmax;
use super::repository::{Repository, N_ALGOS};
use crate::validity::{f1_micro, Cvi};

pub const N_THRESHOLDS: usize = 101;

/// A threshold fitted on training rows and its predictions on test rows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdFit {
    pub threshold: f64,
    pub train_f1: f64,
    pub bits: Vec<[bool; N_ALGOS]>,
    pub selected: Vec<usize>,
}

fn predict_row(v: &[f64; N_ALGOS], threshold: f64) -> [bool; N_ALGOS] {
    let mut bits = [false; N_ALGOS];
    for (b, &x) in bits.iter_mut().zip(v) {
        *b = x >= threshold;
    }
    if !bits.iter().any(|&b| b) {
        bits[argmax(v)] = true;
    }
    bits
}

fn to_vecs(rows: &[[bool; N_ALGOS]]) -> Vec<Vec<bool>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Sweep evenly spaced thresholds over the finite range of the training
/// values (higher = better, `-inf` = undefined) and keep the one with the
/// best micro-F1 against `labels`; the lowest threshold wins ties.
pub fn threshold_baseline(values: &[[f64; N_ALGOS]], labels: &[[bool; N_ALGOS]], train: &[usize], test: &[usize]) -> ThresholdFit {
    let finite: Vec<f64> = train.iter().flat_map(|&i| values[i].iter().copied()).filter(|v| v.is_finite()).collect();
    let (lo, hi) = finite.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let truth = to_vecs(&train.iter().map(|&i| labels[i]).collect::<Vec<_>>());
    let mut best = (f64::NEG_INFINITY, f64::INFINITY);
    if !finite.is_empty() {
        for t in 0..N_THRESHOLDS {
            let th = lo + (hi - lo) * t as f64 / (N_THRESHOLDS - 1) as f64;
            let pred: Vec<Vec<bool>> = train.iter().map(|&i| predict_row(&values[i], th).to_vec()).collect();
            let f1 = f1_micro(&truth, &pred).unwrap_or(0.0);
            if f1 > best.0 {
                best = (f1, th);
            }
        }
    }
    let bits = test.iter().map(|&i| predict_row(&values[i], best.1)).collect();
    let selected = test.iter().map(|&i| argmax(&values[i])).collect();
    ThresholdFit { threshold: best.1, train_f1: best.0.max(0.0), bits, selected }
}

/// Orientation-normalised index values (Davies-Bouldin negated); undefined
/// values become `-inf`. Also returns how many were undefined.
pub fn oriented_values(repo: &Repository, cvi: Cvi) -> (Vec<[f64; N_ALGOS]>, usize) {
    let c = Cvi::ALL.iter().position(|&x| x == cvi).expect("known index");
    let mut undefined = 0;
    let vals = repo
        .cvi
        .iter()
        .map(|rows| {
            let mut out = [0.0; N_ALGOS];
            for (o, r) in out.iter_mut().zip(rows) {
                let v = if cvi.higher_is_better() { r[c] } else { -r[c] };
                *o = if v.is_nan() || v == f64::NEG_INFINITY {
                    undefined += 1;
                    f64::NEG_INFINITY
                } else {
                    v
                };
            }
            out
        })
        .collect();
    (vals, undefined)
}

pub fn cvi_baseline(repo: &Repository, cvi: Cvi, train: &[usize], test: &[usize]) -> ThresholdFit {
    let (vals, _) = oriented_values(repo, cvi);
    threshold_baseline(&vals, &repo.labels, train, test)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::labels::derive_labels;
    use crate::rng::rng_for;
    use rand::Rng;

    #[test]
    fn oracle_index_recovers_labels() {
        let mut r = rng_for(1, "t", 0);
        let ari: Vec<[f64; N_ALGOS]> = (0..60)
            .map(|_| {
                let mut a = [0.0; N_ALGOS];
                for v in a.iter_mut() {
                    // keep values away from the cut so a grid threshold separates them
                    *v = if r.gen_bool(0.4) { r.gen_range(0.85..1.0) } else { r.gen_range(0.0..0.7) };
                }
                a
            })
            .collect();
        let labels: Vec<[bool; N_ALGOS]> = ari.iter().map(|a| derive_labels(a, 0.8)).collect();
        let train: Vec<usize> = (0..40).collect();
        let test: Vec<usize> = (40..60).collect();
        let fit = threshold_baseline(&ari, &labels, &train, &test);
        assert_eq!(fit.train_f1, 1.0);
        let truth = to_vecs(&test.iter().map(|&i| labels[i]).collect::<Vec<_>>());
        assert_eq!(f1_micro(&truth, &to_vecs(&fit.bits)).unwrap(), 1.0);
    }

    #[test]
    fn constant_index_falls_back_to_argmax() {
        let vals = vec![[0.5; N_ALGOS]; 8];
        let mut labels = vec![[false; N_ALGOS]; 8];
        for l in labels.iter_mut() {
            l[3] = true;
        }
        let fit = threshold_baseline(&vals, &labels, &[0, 1, 2, 3], &[4, 5, 6, 7]);
        // every threshold equals the value, so all bits fire
        assert!(fit.bits.iter().all(|b| b.iter().all(|&x| x)));
        assert!(fit.selected.iter().all(|&s| s == 0));
        let undefined = vec![[f64::NEG_INFINITY; N_ALGOS]; 4];
        let fit = threshold_baseline(&undefined, &labels, &[0, 1], &[2, 3]);
        assert!(fit.bits.iter().all(|b| b[0] && b.iter().filter(|&&x| x).count() == 1));
    }
}
