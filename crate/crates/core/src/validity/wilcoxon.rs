use serde::{Deserialize, Serialize};

use super::ValidityError;

/// Largest sample (after dropping zero differences) that uses the exact
/// null distribution.
pub const EXACT_MAX_N: usize = 15;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    /// Sum of ranks of the positive differences.
    pub w_plus: f64,
    pub n: usize,
    pub p_value: f64,
    pub exact: bool,
}

fn normal_sf(z: f64) -> f64 {
    0.5 * libm::erfc(z / std::f64::consts::SQRT_2)
}

/// Average ranks of |d|, 1-based.
fn ranks(abs: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..abs.len()).collect();
    idx.sort_by(|&a, &b| abs[a].partial_cmp(&abs[b]).unwrap());
    let mut r = vec![0.0; abs.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && abs[idx[j + 1]] == abs[idx[i]] {
            j += 1;
        }
        let avg = (i + j) as f64 / 2.0 + 1.0;
        for &p in &idx[i..=j] {
            r[p] = avg;
        }
        i = j + 1;
    }
    r
}

/// Two-sided signed-rank test on paired samples. Exact for up to
/// [`EXACT_MAX_N`] non-zero differences, otherwise normal with tie and
/// continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<WilcoxonResult, ValidityError> {
    if a.len() != b.len() {
        return Err(ValidityError::LengthMismatch(a.len(), b.len()));
    }
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|v| *v != 0.0).collect();
    if d.is_empty() {
        return Err(ValidityError::AllZeroDifferences);
    }
    let n = d.len();
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let r = ranks(&abs);
    let w_plus: f64 = d.iter().zip(&r).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    if n <= EXACT_MAX_N {
        return Ok(WilcoxonResult { w_plus, n, p_value: exact_p(&r, w_plus), exact: true });
    }
    Ok(WilcoxonResult { w_plus, n, p_value: normal_p(&r, w_plus), exact: false })
}

fn exact_p(r: &[f64], w_plus: f64) -> f64 {
    let n = r.len();
    let total = 1u64 << n;
    let (mut le, mut ge) = (0u64, 0u64);
    let eps = 1e-9;
    for mask in 0..total {
        let w: f64 = (0..n).filter(|&i| mask >> i & 1 == 1).map(|i| r[i]).sum();
        if w <= w_plus + eps {
            le += 1;
        }
        if w >= w_plus - eps {
            ge += 1;
        }
    }
    (2.0 * le.min(ge) as f64 / total as f64).min(1.0)
}

fn normal_p(r: &[f64], w_plus: f64) -> f64 {
    let n = r.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let mut sorted = r.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut tie = 0.0;
    let mut i = 0;
    while i < sorted.len() {
        let j = sorted[i..].iter().take_while(|&&v| v == sorted[i]).count();
        let t = j as f64;
        tie += t * t * t - t;
        i += j;
    }
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - tie / 48.0;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / var.sqrt();
    (2.0 * normal_sf(z)).min(1.0)
}
