use serde::{Deserialize, Serialize};

use super::repository::{Repository, N_ALGOS};
use super::PipelineError;
use crate::clusterlib::Algorithm;
use crate::validity::{f1_micro, f1_samples, hamming, mean_std, wilcoxon_signed_rank, MetricReport};

/// Row-normalised 2×2 confusion matrix of one algorithm's bit; row 0 is
/// truth negative ([TN, FP]), row 1 truth positive ([FN, TP]). A row with no
/// examples is `None`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Confusion {
    pub algorithm: String,
    pub rows: [Option<[f64; 2]>; 2],
    pub counts: [[usize; 2]; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodEval {
    pub method: String,
    pub metrics: MetricReport,
    /// ARI of the selected algorithm for every evaluated dataset.
    pub selected_ari: Vec<f64>,
    pub confusion: Vec<Confusion>,
}

impl MethodEval {
    pub fn median_ari(&self) -> f64 {
        median(&self.selected_ari)
    }
}

pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let mut s = v.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    let m = s.len() / 2;
    if s.len() % 2 == 1 {
        s[m]
    } else {
        (s[m - 1] + s[m]) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonRow {
    pub baseline: String,
    pub metric: String,
    /// `None` when every paired difference is zero.
    pub p_value: Option<f64>,
    pub w_plus: Option<f64>,
    pub n: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// The model first, then the baselines.
    pub methods: Vec<MethodEval>,
    pub wilcoxon: Vec<WilcoxonRow>,
}

impl EvaluationReport {
    pub fn method(&self, name: &str) -> Option<&MethodEval> {
        self.methods.iter().find(|m| m.method == name)
    }

    /// Aligned plain-text table.
    pub fn table(&self) -> String {
        let mut s = format!("{:<10} {:>8} {:>8} {:>9} {:>9} {:>10}\n", "method", "F1", "F1(s)", "Hamming", "ARI", "ARI(med)");
        for m in &self.methods {
            s.push_str(&format!(
                "{:<10} {:>8.4} {:>8.4} {:>9.4} {:>9.4} {:>10.4}\n",
                m.method,
                m.metrics.f1,
                m.metrics.f1_samples,
                m.metrics.hamming,
                m.metrics.mean_ari,
                m.median_ari()
            ));
        }
        if !self.wilcoxon.is_empty() {
            s.push_str(&format!("\n{:<10} {:<8} {:>10} {:>4}\n", "vs", "metric", "p", "n"));
            for w in &self.wilcoxon {
                let p = w.p_value.map_or("-".to_string(), |p| format!("{p:.4}"));
                s.push_str(&format!("{:<10} {:<8} {:>10} {:>4}\n", w.baseline, w.metric, p, w.n));
            }
        }
        s
    }
}

fn confusion(truth: &[[bool; N_ALGOS]], pred: &[[bool; N_ALGOS]]) -> Vec<Confusion> {
    Algorithm::ALL
        .iter()
        .enumerate()
        .map(|(a, algo)| {
            let mut counts = [[0usize; 2]; 2];
            for (t, p) in truth.iter().zip(pred) {
                counts[usize::from(t[a])][usize::from(p[a])] += 1;
            }
            let norm = |r: [usize; 2]| {
                let s = r[0] + r[1];
                (s > 0).then(|| [r[0] as f64 / s as f64, r[1] as f64 / s as f64])
            };
            Confusion { algorithm: algo.name().to_string(), rows: [norm(counts[0]), norm(counts[1])], counts }
        })
        .collect()
}

fn vecs(rows: &[[bool; N_ALGOS]]) -> Vec<Vec<bool>> {
    rows.iter().map(|r| r.to_vec()).collect()
}

/// Score predictions for `rows` of the repository. `fold_of[j]` groups
/// row j for the per-fold spread.
pub fn evaluate_method(
    repo: &Repository,
    method: &str,
    rows: &[usize],
    bits: &[[bool; N_ALGOS]],
    selected: &[usize],
    fold_of: &[usize],
) -> Result<MethodEval, PipelineError> {
    if bits.len() != rows.len() || selected.len() != rows.len() || fold_of.len() != rows.len() {
        return Err(PipelineError::Malformed(format!("{method}: prediction count does not match rows")));
    }
    let truth: Vec<[bool; N_ALGOS]> = rows.iter().map(|&i| repo.labels[i]).collect();
    let selected_ari: Vec<f64> = rows.iter().zip(selected).map(|(&i, &a)| repo.ari[i][a]).collect();
    let (t, p) = (vecs(&truth), vecs(bits));
    let n_folds = fold_of.iter().max().map_or(0, |m| m + 1);
    let (mut ff, mut fh, mut fa) = (Vec::new(), Vec::new(), Vec::new());
    for f in 0..n_folds {
        let idx: Vec<usize> = (0..rows.len()).filter(|&j| fold_of[j] == f).collect();
        if idx.is_empty() {
            continue;
        }
        let tt: Vec<Vec<bool>> = idx.iter().map(|&j| t[j].clone()).collect();
        let pp: Vec<Vec<bool>> = idx.iter().map(|&j| p[j].clone()).collect();
        ff.push(f1_micro(&tt, &pp)?);
        fh.push(hamming(&tt, &pp)?);
        fa.push(idx.iter().map(|&j| selected_ari[j]).sum::<f64>() / idx.len() as f64);
    }
    let metrics = MetricReport {
        f1: f1_micro(&t, &p)?,
        f1_samples: f1_samples(&t, &p)?,
        hamming: hamming(&t, &p)?,
        mean_ari: mean_std(&selected_ari).0,
        fold_f1: ff,
        fold_hamming: fh,
        fold_ari: fa,
    };
    Ok(MethodEval { method: method.to_string(), metrics, selected_ari, confusion: confusion(&truth, bits) })
}

/// Paired signed-rank tests of the first method against each other one,
/// over per-fold F1, Hamming and ARI.
pub fn compare(methods: Vec<MethodEval>) -> EvaluationReport {
    let mut wilcoxon = Vec::new();
    if let Some((model, rest)) = methods.split_first() {
        for b in rest {
            for (metric, x, y) in [
                ("f1", &model.metrics.fold_f1, &b.metrics.fold_f1),
                ("hamming", &model.metrics.fold_hamming, &b.metrics.fold_hamming),
                ("ari", &model.metrics.fold_ari, &b.metrics.fold_ari),
            ] {
                let r = wilcoxon_signed_rank(x, y).ok();
                wilcoxon.push(WilcoxonRow {
                    baseline: b.method.clone(),
                    metric: metric.to_string(),
                    p_value: r.as_ref().map(|r| r.p_value),
                    w_plus: r.as_ref().map(|r| r.w_plus),
                    n: x.len(),
                });
            }
        }
    }
    EvaluationReport { methods, wilcoxon }
}
