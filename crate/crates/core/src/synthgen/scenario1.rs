use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{shuffle_rows, Dataset, Provenance, Scenario1Params, Source, SynthError};
use crate::matrix::Matrix;
use crate::rng::rng_for;

pub(crate) fn validate(p: &Scenario1Params) -> Result<(), SynthError> {
    if p.k == 0 || p.d == 0 || p.ne == 0 {
        return Err(SynthError::InvalidParams("k, d and ne must be at least 1".into()));
    }
    if p.k * p.ne != p.n {
        return Err(SynthError::InvalidParams(format!("k * ne = {} but n = {}", p.k * p.ne, p.n)));
    }
    if !(p.alpha > 0.0) || !p.alpha.is_finite() {
        return Err(SynthError::InvalidParams(format!("alpha must be positive, got {}", p.alpha)));
    }
    if !(0.1 - 1e-12..=10.0 + 1e-12).contains(&p.alpha) {
        return Err(SynthError::InvalidParams(format!("alpha {} outside [0.1, 10]", p.alpha)));
    }
    Ok(())
}

/// Isotropic Gaussian clusters.
///
/// Centres are drawn from `N(0, alpha^2 I)`, points from `N(centre, I)`.
/// Rows are shuffled so that cluster membership is not visible in row order.
pub fn gen_scenario1(p: &Scenario1Params) -> Result<Dataset, SynthError> {
    validate(p)?;
    let mut rng = rng_for(p.seed, "scenario1", 0);
    let centers: Vec<Vec<f64>> = (0..p.k)
        .map(|_| (0..p.d).map(|_| p.alpha * rng.sample::<f64, _>(StandardNormal)).collect())
        .collect();
    let mut x = Matrix::zeros(p.n, p.d);
    let mut y = Vec::with_capacity(p.n);
    for (c, center) in centers.iter().enumerate() {
        for i in 0..p.ne {
            let row = x.row_mut(c * p.ne + i);
            for (v, &mu) in row.iter_mut().zip(center) {
                *v = mu + rng.sample::<f64, _>(StandardNormal);
            }
            y.push(c as i32);
        }
    }
    let (x, y) = shuffle_rows(x, y, &mut rng);
    Dataset::new(
        x,
        Some(y),
        Provenance { source: Source::Scenario1(p.clone()), subsample_seed: None, overlaps: None },
    )
}
