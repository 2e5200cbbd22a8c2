//! Dataset CSV files: header `f0,...,f{D-1},label`, one row per object,
//! values printed with 9 significant digits, `-2` in the label column when
//! no ground truth is known.

use std::io::Read;
use std::path::Path;

use super::{Dataset, Provenance, SynthError};
use crate::matrix::Matrix;

const NO_LABEL: i64 = -2;

/// Decimal rendering with 9 significant digits (like C's `%.9g`).
pub fn format_sig9(v: f64) -> String {
    if v == 0.0 {
        return "0".to_string();
    }
    let exp = v.abs().log10().floor() as i32;
    // rounding can bump the exponent, so measure after formatting in e-notation
    let e_repr = format!("{:.8e}", v);
    let exp_after: i32 = e_repr.split('e').nth(1).and_then(|s| s.parse().ok()).unwrap_or(exp);
    if (-5..9).contains(&exp_after) {
        let decimals = (8 - exp_after).max(0) as usize;
        let s = format!("{:.*}", decimals, v);
        if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        }
    } else {
        let (mant, e) = e_repr.split_once('e').unwrap();
        let mant = if mant.contains('.') { mant.trim_end_matches('0').trim_end_matches('.') } else { mant };
        format!("{mant}e{e}")
    }
}

pub fn write_dataset_csv(d: &Dataset) -> String {
    let mut out = String::new();
    for j in 0..d.n_cols() {
        out.push_str(&format!("f{j},"));
    }
    out.push_str("label\n");
    for i in 0..d.n_rows() {
        for v in d.x.row(i) {
            out.push_str(&format_sig9(*v));
            out.push(',');
        }
        let label = d.y_true.as_ref().map_or(NO_LABEL, |y| i64::from(y[i]));
        out.push_str(&label.to_string());
        out.push('\n');
    }
    out
}

/// Parse a dataset CSV. The trailing `label` column is optional; a column
/// made entirely of `-2` means no ground truth.
pub fn read_dataset_str(text: &str, name: &str) -> Result<Dataset, SynthError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = rdr.headers().map_err(|e| SynthError::Malformed(e.to_string()))?.clone();
    let has_label = headers.iter().last().map(|h| h.trim() == "label").unwrap_or(false);
    let n_feat = headers.len() - usize::from(has_label);
    if n_feat == 0 {
        return Err(SynthError::Malformed("no feature columns".into()));
    }
    let mut data = Vec::new();
    let mut labels = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SynthError::Malformed(e.to_string()))?;
        if rec.len() != headers.len() {
            return Err(SynthError::Malformed(format!("row {} has {} fields", line + 1, rec.len())));
        }
        for j in 0..n_feat {
            let v: f64 = rec[j]
                .trim()
                .parse()
                .map_err(|_| SynthError::Malformed(format!("row {} column {}: {:?}", line + 1, j, &rec[j])))?;
            data.push(v);
        }
        if has_label {
            let l: i64 = rec[n_feat]
                .trim()
                .parse()
                .map_err(|_| SynthError::Malformed(format!("row {}: bad label", line + 1)))?;
            labels.push(l);
        }
    }
    let rows = data.len() / n_feat;
    let x = Matrix::from_vec(rows, n_feat, data);
    let y = if has_label && !labels.iter().all(|&l| l == NO_LABEL) {
        Some(relabel(&labels))
    } else {
        None
    };
    Dataset::new(x, y, Provenance::external(name))
}

// Map arbitrary integer class ids onto 0..K-1 in order of first appearance.
fn relabel(labels: &[i64]) -> Vec<i32> {
    let mut map = std::collections::BTreeMap::new();
    let mut sorted: Vec<i64> = labels.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    for (i, l) in sorted.into_iter().enumerate() {
        map.insert(l, i as i32);
    }
    labels.iter().map(|l| map[l]).collect()
}

pub fn read_dataset_csv(path: &Path) -> Result<Dataset, SynthError> {
    let mut text = String::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| SynthError::Malformed(format!("{}: {e}", path.display())))?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    read_dataset_str(&text, &name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig9_formatting() {
        assert_eq!(format_sig9(0.0), "0");
        assert_eq!(format_sig9(1.0), "1");
        assert_eq!(format_sig9(-1.224744871391589), "-1.22474487");
        assert_eq!(format_sig9(123456.789012), "123456.789");
        assert_eq!(format_sig9(0.000123456789123), "0.000123456789");
        assert_eq!(format_sig9(1.5e-7), "1.5e-7");
        assert_eq!(format_sig9(9.9999999999), "10");
        assert_eq!(format_sig9(2.5e12), "2.5e12");
    }

    #[test]
    fn roundtrip_with_and_without_labels() {
        let x = Matrix::from_rows(&[vec![0.5, -1.25], vec![3.0, 4.0], vec![1.0, 1.0]]);
        let d = Dataset::new(x.clone(), Some(vec![1, 0, 1]), Provenance::external("a")).unwrap();
        let text = write_dataset_csv(&d);
        assert!(text.starts_with("f0,f1,label\n0.5,-1.25,1\n"));
        let back = read_dataset_str(&text, "a").unwrap();
        assert_eq!(back.x, x);
        assert_eq!(back.y_true, Some(vec![1, 0, 1]));

        let d = Dataset::new(x, None, Provenance::external("b")).unwrap();
        let text = write_dataset_csv(&d);
        assert!(text.lines().nth(1).unwrap().ends_with(",-2"));
        assert_eq!(read_dataset_str(&text, "b").unwrap().y_true, None);
    }

    #[test]
    fn label_column_optional_and_relabelled() {
        let d = read_dataset_str("f0,f1\n1,2\n3,4\n", "x").unwrap();
        assert_eq!(d.n_cols(), 2);
        assert!(d.y_true.is_none());
        let d = read_dataset_str("a,b,label\n1,2,5\n3,4,9\n5,5,5\n", "x").unwrap();
        assert_eq!(d.y_true, Some(vec![0, 1, 0]));
    }

    #[test]
    fn malformed_rows_rejected() {
        assert!(read_dataset_str("f0,label\nabc,1\n", "x").is_err());
        assert!(read_dataset_str("f0,label\n1,2,3\n", "x").is_err());
    }
}
