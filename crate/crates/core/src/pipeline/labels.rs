use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::repository::N_ALGOS;
use super::PipelineError;
use crate::rng::rng_for;

pub const DEFAULT_TAU: f64 = 0.8;

/// Index of the largest value; ties and NaNs resolve to the lowest index.
pub fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] || (v[best].is_nan() && !x.is_nan()) {
            best = i;
        }
    }
    best
}

/// Bit i is set iff `ari[i] >= tau`; when none qualifies only the argmax bit is set.
pub fn derive_labels(ari: &[f64; N_ALGOS], tau: f64) -> [bool; N_ALGOS] {
    let mut bits = [false; N_ALGOS];
    for (b, &a) in bits.iter_mut().zip(ari) {
        *b = a >= tau;
    }
    if !bits.iter().any(|&b| b) {
        bits[argmax(ari)] = true;
    }
    bits
}

/// A held-out tenth plus `k` cross-validation folds over the rest.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub holdout: Vec<usize>,
    pub folds: Vec<Vec<usize>>,
}

impl FoldPlan {
    /// Indices of every fold except `f`.
    pub fn train_indices(&self, f: usize) -> Vec<usize> {
        self.folds.iter().enumerate().filter(|&(g, _)| g != f).flat_map(|(_, v)| v.iter().copied()).collect()
    }

    pub fn cv_indices(&self) -> Vec<usize> {
        self.folds.iter().flatten().copied().collect()
    }
}

pub fn kfold_split(n: usize, k: usize, seed: u64) -> Result<FoldPlan, PipelineError> {
    if k == 0 || n < k {
        return Err(PipelineError::TooFewDatasets { n, k });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, "kfold", 0));
    let n_hold = ((n as f64) * 0.1).round() as usize;
    let n_hold = n_hold.min(n - k);
    let mut holdout = idx[..n_hold].to_vec();
    holdout.sort_unstable();
    let rest = &idx[n_hold..];
    let m = rest.len();
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = m / k + usize::from(f < m % k);
        let mut fold = rest[start..start + len].to_vec();
        fold.sort_unstable();
        folds.push(fold);
        start += len;
    }
    Ok(FoldPlan { holdout, folds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_rule() {
        let mut a = [0.1; 10];
        a[0] = 0.9;
        a[1] = 0.85;
        let b = derive_labels(&a, 0.8);
        assert_eq!(b.iter().filter(|&&x| x).count(), 2);
        assert!(b[0] && b[1]);
    }

    #[test]
    fn fallback_and_boundary() {
        let mut a = [0.3; 10];
        a[4] = 0.7;
        let b = derive_labels(&a, 0.8);
        assert_eq!(b.iter().position(|&x| x), Some(4));
        assert_eq!(b.iter().filter(|&&x| x).count(), 1);
        assert!(derive_labels(&[0.8; 10], 0.8).iter().all(|&x| x));
        let tie = derive_labels(&[0.5; 10], 0.8);
        assert!(tie[0] && tie.iter().filter(|&&x| x).count() == 1);
    }

    #[test]
    fn split_arithmetic() {
        let p = kfold_split(100, 10, 3).unwrap();
        assert_eq!(p.holdout.len(), 10);
        assert!(p.folds.iter().all(|f| f.len() == 9));
        assert_eq!(p, kfold_split(100, 10, 3).unwrap());
        assert_ne!(p, kfold_split(100, 10, 4).unwrap());
        let mut all: Vec<usize> = p.holdout.iter().chain(p.folds.iter().flatten()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
        let q = kfold_split(23, 4, 0).unwrap();
        let sizes: Vec<usize> = q.folds.iter().map(|f| f.len()).collect();
        assert_eq!(q.holdout.len(), 2);
        assert_eq!(sizes, vec![6, 5, 5, 5]);
        assert!(matches!(kfold_split(3, 5, 0), Err(PipelineError::TooFewDatasets { .. })));
        assert_eq!(kfold_split(10, 10, 0).unwrap().holdout.len(), 0);
    }

    #[test]
    fn argmax_ties_and_nan() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0]), 1);
        assert_eq!(argmax(&[f64::NAN, 0.5, 0.7]), 2);
        assert_eq!(argmax(&[f64::NEG_INFINITY; 3]), 0);
    }
}
