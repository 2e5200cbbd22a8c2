use crate::matrix::{sq_euclidean, Matrix};

fn mean_row(m: &Matrix) -> Vec<f64> {
    let mut c = vec![0.0; m.cols()];
    for row in m.iter_rows() {
        for (acc, v) in c.iter_mut().zip(row) {
            *acc += v;
        }
    }
    let n = m.rows() as f64;
    c.iter_mut().for_each(|v| *v /= n);
    c
}

/// Fraction of the points of `a` and `b` that are strictly closer to the
/// other sample's mean than to their own.
///
/// Both samples must be non-empty with the same number of columns.
pub fn estimate_overlap(a: &Matrix, b: &Matrix) -> f64 {
    assert!(a.rows() > 0 && b.rows() > 0, "empty cluster sample");
    assert_eq!(a.cols(), b.cols(), "dimension mismatch");
    let ca = mean_row(a);
    let cb = mean_row(b);
    overlap_with_centers(a, &ca, b, &cb)
}

pub(crate) fn overlap_with_centers(a: &Matrix, ca: &[f64], b: &Matrix, cb: &[f64]) -> f64 {
    let mut wrong = 0usize;
    for row in a.iter_rows() {
        if sq_euclidean(row, cb) < sq_euclidean(row, ca) {
            wrong += 1;
        }
    }
    for row in b.iter_rows() {
        if sq_euclidean(row, ca) < sq_euclidean(row, cb) {
            wrong += 1;
        }
    }
    wrong as f64 / (a.rows() + b.rows()) as f64
}

/// Upper-triangular pairwise overlaps of the clusters of a labelled matrix.
pub fn pairwise_overlaps(x: &Matrix, labels: &[i32]) -> Vec<f64> {
    let k = labels.iter().copied().max().map_or(0, |m| m as usize + 1);
    let groups: Vec<Matrix> = (0..k)
        .map(|c| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c as i32).collect();
            x.select_rows(&idx)
        })
        .collect();
    let mut out = Vec::new();
    for i in 0..k {
        for j in i + 1..k {
            out.push(estimate_overlap(&groups[i], &groups[j]));
        }
    }
    out
}
