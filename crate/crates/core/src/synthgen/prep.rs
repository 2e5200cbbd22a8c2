use rand::seq::index::sample;

use super::{Dataset, SynthError};
use crate::matrix::Matrix;
use crate::rng::rng_for;

pub const DEFAULT_PAD_H: usize = 256;
pub const DEFAULT_PAD_W: usize = 64;

/// Column-wise z-scores using the population standard deviation.
/// Constant columns become all zeros.
pub fn zscore_normalize(d: &Dataset) -> Dataset {
    let (n, m) = (d.n_rows(), d.n_cols());
    let mut x = d.x.clone();
    for j in 0..m {
        let col = d.x.column(j);
        let mean = col.iter().sum::<f64>() / n as f64;
        let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        let scale = col.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let constant = sd <= 1e-12 * scale.max(1.0);
        for i in 0..n {
            x[(i, j)] = if constant { 0.0 } else { (d.x[(i, j)] - mean) / sd };
        }
    }
    d.with_x(x)
}

/// A dataset centred inside an `h x w` zero canvas.
#[derive(Clone, Debug, PartialEq)]
pub struct PaddedTensorView {
    pub h: usize,
    pub w: usize,
    pub orig_rows: usize,
    pub orig_cols: usize,
    /// Row-major `h * w` values; the single channel is implicit.
    pub data: Vec<f64>,
}

impl PaddedTensorView {
    pub fn top(&self) -> usize {
        (self.h - self.orig_rows) / 2
    }

    pub fn left(&self) -> usize {
        (self.w - self.orig_cols) / 2
    }

    /// The content block with padding stripped.
    pub fn strip(&self) -> Matrix {
        let (top, left) = (self.top(), self.left());
        let mut m = Matrix::zeros(self.orig_rows, self.orig_cols);
        for i in 0..self.orig_rows {
            let src = &self.data[(top + i) * self.w + left..(top + i) * self.w + left + self.orig_cols];
            m.row_mut(i).copy_from_slice(src);
        }
        m
    }
}

/// Symmetric zero padding to `h x w`.
pub fn pad_to(d: &Dataset, h: usize, w: usize) -> Result<PaddedTensorView, SynthError> {
    let (n, m) = (d.n_rows(), d.n_cols());
    if n > h || m > w {
        return Err(SynthError::ShapeOverflow { rows: n, cols: m, h, w });
    }
    let top = (h - n) / 2;
    let left = (w - m) / 2;
    let mut data = vec![0.0; h * w];
    for i in 0..n {
        data[(top + i) * w + left..(top + i) * w + left + m].copy_from_slice(d.x.row(i));
    }
    Ok(PaddedTensorView { h, w, orig_rows: n, orig_cols: m, data })
}

/// Row-subsample (keeping row order) when the dataset is taller than `h`,
/// then pad. The subsample seed is recorded in the returned dataset.
pub fn fit_to(d: &Dataset, h: usize, w: usize, seed: u64) -> Result<(Dataset, PaddedTensorView), SynthError> {
    if d.n_cols() > w {
        return Err(SynthError::ShapeOverflow { rows: d.n_rows(), cols: d.n_cols(), h, w });
    }
    let fitted = if d.n_rows() > h {
        let sub_seed = crate::rng::substream(seed, "subsample", 0);
        let mut rng = rng_for(sub_seed, "rows", 0);
        let mut idx = sample(&mut rng, d.n_rows(), h).into_vec();
        idx.sort_unstable();
        let mut meta = d.meta.clone();
        meta.subsample_seed = Some(sub_seed);
        Dataset {
            x: d.x.select_rows(&idx),
            y_true: d.y_true.as_ref().map(|y| idx.iter().map(|&i| y[i]).collect()),
            meta,
        }
    } else {
        d.clone()
    };
    let view = pad_to(&fitted, h, w)?;
    Ok((fitted, view))
}
