use std::collections::BTreeMap;

use super::ValidityError;

/// Counts of points shared by each (row cluster, column cluster) pair.
#[derive(Clone, Debug, PartialEq)]
pub struct ContingencyTable {
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

// Noise (-1) points become singletons with fresh ids.
fn dense(labels: &[i32]) -> (Vec<usize>, usize) {
    let mut map = BTreeMap::new();
    let mut out = Vec::with_capacity(labels.len());
    let mut next = 0;
    for &l in labels {
        if l < 0 {
            out.push(next);
            next += 1;
            continue;
        }
        let id = *map.entry(l).or_insert_with(|| {
            next += 1;
            next - 1
        });
        out.push(id);
    }
    (out, next)
}

impl ContingencyTable {
    pub fn new(a: &[i32], b: &[i32]) -> Result<Self, ValidityError> {
        if a.len() != b.len() {
            return Err(ValidityError::LengthMismatch(a.len(), b.len()));
        }
        let (da, ra) = dense(a);
        let (db, cb) = dense(b);
        let mut counts = vec![vec![0u64; cb]; ra];
        for (&i, &j) in da.iter().zip(&db) {
            counts[i][j] += 1;
        }
        let row_sums: Vec<u64> = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums: Vec<u64> = (0..cb).map(|j| counts.iter().map(|r| r[j]).sum()).collect();
        Ok(ContingencyTable { counts, row_sums, col_sums, total: a.len() as u64 })
    }
}

fn pairs(n: u64) -> f64 {
    (n * n.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index. Noise labels count as singleton clusters.
pub fn ari(a: &[i32], b: &[i32]) -> Result<f64, ValidityError> {
    let t = ContingencyTable::new(a, b)?;
    if t.total < 2 {
        return Err(ValidityError::TooFewPoints);
    }
    let index: f64 = t.counts.iter().flatten().map(|&c| pairs(c)).sum();
    let sa: f64 = t.row_sums.iter().map(|&c| pairs(c)).sum();
    let sb: f64 = t.col_sums.iter().map(|&c| pairs(c)).sum();
    let expected = sa * sb / pairs(t.total);
    let max = 0.5 * (sa + sb);
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
