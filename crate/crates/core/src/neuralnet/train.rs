//! Mini-batch training, k-fold cross-validation and prediction.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::autograd::{bce_value, sigmoid, Graph};
use super::model::{ArchConfig, RecommenderNet};
use super::optim::Adam;
use super::NnError;
use crate::rng::{rng_for, substream};
use crate::validity::{f1_micro, hamming};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub folds: usize,
    pub seed: u64,
    pub decoupled_decay: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { lr: 1e-4, weight_decay: 7e-3, epochs: 30, batch_size: 32, folds: 10, seed: 0, decoupled_decay: false }
    }
}

/// One padded input with its binary target vector.
#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    pub input: Vec<f64>,
    pub target: Vec<bool>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fold: usize,
    pub epoch: usize,
    pub split: Split,
    pub bce: f64,
    pub f1: f64,
    pub hamming: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LearningCurves {
    pub points: Vec<CurvePoint>,
}

impl LearningCurves {
    pub fn fold(&self, fold: usize, split: Split) -> Vec<&CurvePoint> {
        self.points.iter().filter(|p| p.fold == fold && p.split == split).collect()
    }

    /// Per-epoch mean of a metric across folds.
    pub fn mean_by_epoch(&self, split: Split, metric: impl Fn(&CurvePoint) -> f64) -> Vec<f64> {
        let n_epochs = self.points.iter().map(|p| p.epoch + 1).max().unwrap_or(0);
        (0..n_epochs)
            .map(|e| {
                let v: Vec<f64> = self.points.iter().filter(|p| p.split == split && p.epoch == e).map(&metric).collect();
                v.iter().sum::<f64>() / v.len().max(1) as f64
            })
            .collect()
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<(), csv::Error> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            wr.serialize(p)?;
        }
        wr.flush()?;
        Ok(())
    }
}

/// Sigmoid scores, thresholded bits and the top-scoring class.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub scores: Vec<f64>,
    pub recommended: usize,
    pub binary: Vec<bool>,
}

impl Prediction {
    pub fn from_logits(logits: &[f64]) -> Self {
        let scores: Vec<f64> = logits.iter().map(|&z| sigmoid(z)).collect();
        let binary = scores.iter().map(|&s| s >= 0.5).collect();
        let mut recommended = 0;
        for (i, &s) in scores.iter().enumerate() {
            if s > scores[recommended] {
                recommended = i;
            }
        }
        Prediction { scores, recommended, binary }
    }
}

fn as_f64(bits: &[bool]) -> impl Iterator<Item = f64> + '_ {
    bits.iter().map(|&b| if b { 1.0 } else { 0.0 })
}

fn check_samples(net: &RecommenderNet, samples: &[&Sample]) -> Result<(), NnError> {
    let k = net.arch.n_classes;
    if samples.iter().any(|s| s.target.len() != k) {
        return Err(NnError::ShapeMismatch(format!("targets must have width {k}")));
    }
    Ok(())
}

/// Activation buffers of several MB are freed and reallocated every batch.
/// glibc would hand each one back to the kernel and fault it in again, so
/// keep them on the heap instead.
fn keep_buffers_on_heap() {
    #[cfg(all(target_os = "linux", target_env = "gnu"))]
    {
        static ONCE: std::sync::Once = std::sync::Once::new();
        ONCE.call_once(|| unsafe {
            libc::mallopt(libc::M_MMAP_THRESHOLD, 32 << 20);
            libc::mallopt(libc::M_TRIM_THRESHOLD, i32::MAX);
        });
    }
}

/// Eval-mode logits in chunks.
pub fn infer(net: &RecommenderNet, inputs: &[&[f64]]) -> Result<Vec<Vec<f64>>, NnError> {
    keep_buffers_on_heap();
    let mut out = Vec::with_capacity(inputs.len());
    for chunk in inputs.chunks(16) {
        out.extend(net.logits(chunk, false)?);
    }
    Ok(out)
}

pub fn predict(net: &RecommenderNet, inputs: &[&[f64]]) -> Result<Vec<Prediction>, NnError> {
    Ok(infer(net, inputs)?.iter().map(|l| Prediction::from_logits(l)).collect())
}

/// (bce, micro F1, Hamming) of logits against targets.
pub fn score_logits(logits: &[Vec<f64>], targets: &[&[bool]]) -> (f64, f64, f64) {
    let z: Vec<f64> = logits.iter().flatten().copied().collect();
    let t: Vec<f64> = targets.iter().flat_map(|t| as_f64(t)).collect();
    let truth: Vec<Vec<bool>> = targets.iter().map(|t| t.to_vec()).collect();
    let pred: Vec<Vec<bool>> = logits.iter().map(|l| Prediction::from_logits(l).binary).collect();
    let f1 = f1_micro(&truth, &pred).unwrap_or(0.0);
    let ham = hamming(&truth, &pred).unwrap_or(1.0);
    (bce_value(&z, &t), f1, ham)
}

/// Train `net` in place on `train`, recording one train and (when `val` is
/// non-empty) one validation curve point per epoch.
pub fn fit(
    net: &mut RecommenderNet,
    train: &[&Sample],
    val: &[&Sample],
    cfg: &TrainConfig,
    fold: usize,
    curves: &mut LearningCurves,
) -> Result<(), NnError> {
    keep_buffers_on_heap();
    check_samples(net, train)?;
    check_samples(net, val)?;
    if train.len() < 2 || cfg.batch_size == 0 {
        return Err(NnError::EmptyRepository);
    }
    let mut opt = Adam::new(cfg.lr, cfg.weight_decay);
    opt.decoupled = cfg.decoupled_decay;
    let mut order: Vec<usize> = (0..train.len()).collect();
    for epoch in 0..cfg.epochs {
        let mut rng = rng_for(cfg.seed, "nn-shuffle", ((fold as u64) << 32) | epoch as u64);
        order.shuffle(&mut rng);
        let mut batches: Vec<&[usize]> = order.chunks(cfg.batch_size).collect();
        if batches.len() > 1 && batches.last().is_some_and(|b| b.len() == 1) {
            batches.pop();
        }
        let mut epoch_logits = Vec::new();
        let mut epoch_targets: Vec<&[bool]> = Vec::new();
        for batch in batches {
            let inputs: Vec<&[f64]> = batch.iter().map(|&i| train[i].input.as_slice()).collect();
            let targets: Vec<f64> = batch.iter().flat_map(|&i| as_f64(&train[i].target)).collect();
            let mut g = Graph::new();
            let x = g.leaf(net.batch_tensor(&inputs)?, false);
            let f = net.forward(&mut g, x, true)?;
            let loss = g.bce_with_logits(f.logits, &targets)?;
            g.backward(loss)?;
            opt.tick();
            for (name, var) in &f.vars {
                let p = net.params.get_mut(name).expect("bound parameter");
                if !p.trainable {
                    continue;
                }
                let grad = g.grad(*var).map(|s| s.to_vec()).unwrap_or_else(|| vec![0.0; p.tensor.len()]);
                opt.update(name, &mut p.tensor.data, &grad);
            }
            net.apply_stats(&f.stats);
            let k = net.arch.n_classes;
            epoch_logits.extend(g.value(f.logits).data.chunks(k).map(|c| c.to_vec()));
            epoch_targets.extend(batch.iter().map(|&i| train[i].target.as_slice()));
        }
        let (bce, f1, ham) = score_logits(&epoch_logits, &epoch_targets);
        curves.points.push(CurvePoint { fold, epoch, split: Split::Train, bce, f1, hamming: ham });
        if !val.is_empty() {
            let inputs: Vec<&[f64]> = val.iter().map(|s| s.input.as_slice()).collect();
            let targets: Vec<&[bool]> = val.iter().map(|s| s.target.as_slice()).collect();
            let (bce, f1, ham) = score_logits(&infer(net, &inputs)?, &targets);
            curves.points.push(CurvePoint { fold, epoch, split: Split::Validation, bce, f1, hamming: ham });
        }
    }
    Ok(())
}

/// Result of k-fold training.
#[derive(Clone, Debug)]
pub struct CvOutcome {
    pub fold_models: Vec<RecommenderNet>,
    pub curves: LearningCurves,
    /// Eval-mode logits of each sample from the model that did not see it.
    pub oof_logits: Vec<Option<Vec<f64>>>,
    /// Fold whose model has the lowest final validation loss.
    pub best_fold: usize,
}

impl CvOutcome {
    pub fn best_model(&self) -> &RecommenderNet {
        &self.fold_models[self.best_fold]
    }
}

/// Train one model per fold; `folds[f]` lists the validation indices of fold f.
pub fn cross_validate(arch: &ArchConfig, samples: &[Sample], folds: &[Vec<usize>], cfg: &TrainConfig) -> Result<CvOutcome, NnError> {
    if samples.is_empty() || folds.is_empty() {
        return Err(NnError::EmptyRepository);
    }
    let mut in_fold = vec![usize::MAX; samples.len()];
    for (f, idx) in folds.iter().enumerate() {
        for &i in idx {
            if i >= samples.len() || in_fold[i] != usize::MAX {
                return Err(NnError::InvalidFolds);
            }
            in_fold[i] = f;
        }
    }
    let mut curves = LearningCurves::default();
    let mut models = Vec::with_capacity(folds.len());
    let mut oof = vec![None; samples.len()];
    let mut best = (f64::INFINITY, 0);
    for (f, val_idx) in folds.iter().enumerate() {
        let train: Vec<&Sample> = (0..samples.len()).filter(|&i| in_fold[i] != f).map(|i| &samples[i]).collect();
        let val: Vec<&Sample> = val_idx.iter().map(|&i| &samples[i]).collect();
        let mut net = RecommenderNet::new(arch.clone(), substream(cfg.seed, "nn-fold", f as u64))?;
        fit(&mut net, &train, &val, cfg, f, &mut curves)?;
        let inputs: Vec<&[f64]> = val.iter().map(|s| s.input.as_slice()).collect();
        for (&i, l) in val_idx.iter().zip(infer(&net, &inputs)?) {
            oof[i] = Some(l);
        }
        let last = curves.fold(f, Split::Validation).last().map_or(f64::INFINITY, |p| p.bce);
        if last < best.0 {
            best = (last, f);
        }
        models.push(net);
    }
    Ok(CvOutcome { fold_models: models, curves, oof_logits: oof, best_fold: best.1 })
}

/// Seeded permutation cut into `k` near-equal folds.
pub fn fold_assignment(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, NnError> {
    if k == 0 || n < k {
        return Err(NnError::InvalidFolds);
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, "nn-folds", 0));
    let mut out = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = n / k + usize::from(f < n % k);
        out.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(out)
}

/// k-fold training over all samples; returns the best fold's model.
pub fn train(arch: &ArchConfig, samples: &[Sample], cfg: &TrainConfig) -> Result<(RecommenderNet, LearningCurves), NnError> {
    let folds = fold_assignment(samples.len(), cfg.folds, cfg.seed)?;
    let out = cross_validate(arch, samples, &folds, cfg)?;
    let best = out.fold_models[out.best_fold].clone();
    Ok((best, out.curves))
}
