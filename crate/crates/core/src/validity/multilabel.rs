use super::ValidityError;

fn check(truth: &[Vec<bool>], pred: &[Vec<bool>]) -> Result<(), ValidityError> {
    if truth.len() != pred.len() || truth.iter().zip(pred).any(|(a, b)| a.len() != b.len()) {
        return Err(ValidityError::ShapeMismatch);
    }
    Ok(())
}

fn f1_counts(tp: usize, fp: usize, fnn: usize) -> f64 {
    if tp + fp + fnn == 0 {
        return 1.0;
    }
    2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
}

fn counts<'a>(pairs: impl Iterator<Item = (&'a bool, &'a bool)>) -> (usize, usize, usize) {
    pairs.fold((0, 0, 0), |(tp, fp, fnn), (&t, &p)| (tp + (t && p) as usize, fp + (!t && p) as usize, fnn + (t && !p) as usize))
}

/// Micro-averaged F1 over every bit. Both matrices all-zero scores 1.
pub fn f1_micro(truth: &[Vec<bool>], pred: &[Vec<bool>]) -> Result<f64, ValidityError> {
    check(truth, pred)?;
    let (tp, fp, fnn) = counts(truth.iter().flatten().zip(pred.iter().flatten()));
    Ok(f1_counts(tp, fp, fnn))
}

/// Same as [`f1_micro`].
pub fn f1_multilabel(truth: &[Vec<bool>], pred: &[Vec<bool>]) -> Result<f64, ValidityError> {
    f1_micro(truth, pred)
}

/// Per-row F1 averaged over rows.
pub fn f1_samples(truth: &[Vec<bool>], pred: &[Vec<bool>]) -> Result<f64, ValidityError> {
    check(truth, pred)?;
    if truth.is_empty() {
        return Ok(1.0);
    }
    let total: f64 = truth
        .iter()
        .zip(pred)
        .map(|(t, p)| {
            let (tp, fp, fnn) = counts(t.iter().zip(p));
            f1_counts(tp, fp, fnn)
        })
        .sum();
    Ok(total / truth.len() as f64)
}

/// Fraction of mismatched bits.
pub fn hamming(truth: &[Vec<bool>], pred: &[Vec<bool>]) -> Result<f64, ValidityError> {
    check(truth, pred)?;
    let total: usize = truth.iter().map(|r| r.len()).sum();
    if total == 0 {
        return Ok(0.0);
    }
    let miss = truth.iter().flatten().zip(pred.iter().flatten()).filter(|(a, b)| a != b).count();
    Ok(miss as f64 / total as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bits(s: &[&str]) -> Vec<Vec<bool>> {
        s.iter().map(|r| r.chars().map(|c| c == '1').collect()).collect()
    }

    #[test]
    fn f1_cases() {
        let t = bits(&["1010000000", "0100000001"]);
        assert_eq!(f1_micro(&t, &t).unwrap(), 1.0);
        let t1 = bits(&["1010000000"]);
        let p1 = bits(&["1110000000"]);
        assert!((f1_micro(&t1, &p1).unwrap() - 0.8).abs() < 1e-12);
        let comp: Vec<Vec<bool>> = t.iter().map(|r| r.iter().map(|b| !b).collect()).collect();
        assert_eq!(f1_micro(&t, &comp).unwrap(), 0.0);
        let z = bits(&["000", "000"]);
        assert_eq!(f1_micro(&z, &z).unwrap(), 1.0);
        assert_eq!(f1_micro(&z, &bits(&["000", "010"])).unwrap(), 0.0);
    }

    #[test]
    fn samples_average_differs_from_micro() {
        let t = bits(&["1000", "1111"]);
        let p = bits(&["1000", "1000"]);
        // rows: 1.0 and 2/5
        assert!((f1_samples(&t, &p).unwrap() - 0.7).abs() < 1e-12);
        // pooled: tp 2, fn 3
        assert!((f1_micro(&t, &p).unwrap() - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn hamming_cases() {
        assert!((hamming(&bits(&["101"]), &bits(&["111"])).unwrap() - 1.0 / 3.0).abs() < 1e-12);
        assert_eq!(hamming(&bits(&["101"]), &bits(&["101"])).unwrap(), 0.0);
        assert_eq!(hamming(&bits(&["101"]), &bits(&["010"])).unwrap(), 1.0);
        assert_eq!(hamming(&bits(&["101"]), &bits(&["10"])).unwrap_err(), ValidityError::ShapeMismatch);
    }
}
