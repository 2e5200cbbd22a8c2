use serde::{Deserialize, Serialize};

use super::{gen_scenario1, zscore_normalize, Scenario1Params, SynthError};
use crate::clusterlib::Clusterer;
use crate::rng::substream;
use crate::validity::ari;

/// ARI above which a clustering counts as a success.
pub const SUCCESS_ARI: f64 = 0.8;
/// Some algorithm must succeed on strictly more than this fraction.
pub const MIN_SUCCESS_FRACTION: f64 = 0.2;
/// Feasible grid points in a row needed to end the search early.
pub const MIN_RUN: usize = 5;

/// Scenario-1 configuration without the separation scalar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario1Base {
    pub k: usize,
    pub ne: usize,
    pub d: usize,
}

impl Scenario1Base {
    pub fn with_alpha(&self, alpha: f64, seed: u64) -> Scenario1Params {
        Scenario1Params { k: self.k, n: self.k * self.ne, d: self.d, ne: self.ne, alpha, seed }
    }
}

/// Success fractions of every algorithm at one `alpha`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaCheck {
    pub alpha: f64,
    pub success_fraction: Vec<f64>,
}

impl AlphaCheck {
    /// No algorithm exceeds the ARI threshold on every dataset.
    pub fn none_dominates(&self) -> bool {
        self.success_fraction.iter().all(|&f| f < 1.0)
    }

    /// Some algorithm exceeds the threshold on more than 20% of datasets.
    pub fn some_succeeds(&self) -> bool {
        self.success_fraction.iter().any(|&f| f > MIN_SUCCESS_FRACTION)
    }

    pub fn feasible(&self) -> bool {
        self.none_dominates() && self.some_succeeds()
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AlphaCalibration {
    pub alpha: f64,
    /// The contiguous run of feasible grid points `alpha` was taken from.
    pub feasible_range: (f64, f64),
    pub checks: Vec<AlphaCheck>,
}

/// Evaluate both predicates for `alpha` on datasets generated from `seeds`.
pub fn verify_alpha(
    base: &Scenario1Base,
    alpha: f64,
    algos: &[&dyn Clusterer],
    seeds: &[u64],
) -> Result<AlphaCheck, SynthError> {
    let mut wins = vec![0usize; algos.len()];
    for &s in seeds {
        let d = zscore_normalize(&gen_scenario1(&base.with_alpha(alpha, s))?);
        let truth = d.y_true.clone().expect("generated data is labelled");
        for (a, algo) in algos.iter().enumerate() {
            let labels = algo.cluster(&d)?;
            let score = ari(&truth, labels.as_slice()).expect("equal lengths");
            if score > SUCCESS_ARI {
                wins[a] += 1;
            }
        }
    }
    Ok(AlphaCheck {
        alpha,
        success_fraction: wins.iter().map(|&w| w as f64 / seeds.len() as f64).collect(),
    })
}

/// Grid search of `alpha` over `0.1, 0.2, ..., 10.0`.
///
/// A grid point is feasible when no algorithm beats ARI 0.8 on all `m`
/// datasets while at least one beats it on more than 20% of them. The
/// search walks the grid upwards and stops at the end of the first run of
/// at least [`MIN_RUN`] feasible points, returning its middle. Shorter runs
/// are usually sampling noise at the feasibility boundary; if no run is
/// long enough the longest one found (first on ties) is used.
pub fn calibrate_alpha(
    base: &Scenario1Base,
    algos: &[&dyn Clusterer],
    m: usize,
    seed: u64,
) -> Result<AlphaCalibration, SynthError> {
    if m < 5 {
        return Err(SynthError::InvalidParams("calibration needs at least 5 datasets per alpha".into()));
    }
    if algos.is_empty() {
        return Err(SynthError::InvalidParams("no algorithms to calibrate against".into()));
    }
    let mut checks = Vec::new();
    let mut run: Option<(usize, usize)> = None;
    let mut best: Option<(usize, usize)> = None;
    for step in 1..=100u32 {
        let alpha = f64::from(step) / 10.0;
        let seeds: Vec<u64> = (0..m as u64).map(|i| substream(seed, "calibration", u64::from(step) * 1_000_003 + i)).collect();
        let check = verify_alpha(base, alpha, algos, &seeds)?;
        let feasible = check.feasible();
        checks.push(check);
        let idx = checks.len() - 1;
        run = match (feasible, run) {
            (true, None) => Some((idx, idx)),
            (true, Some((lo, _))) => Some((lo, idx)),
            (false, _) => None,
        };
        if let Some((lo, hi)) = run {
            if best.map_or(true, |(blo, bhi)| hi - lo > bhi - blo) {
                best = Some((lo, hi));
            }
        }
        if !feasible && best.is_some_and(|(lo, hi)| hi - lo + 1 >= MIN_RUN) {
            break;
        }
    }
    let (lo, hi) = best.ok_or(SynthError::AlphaNotFound)?;
    let mid = lo + (hi - lo) / 2;
    Ok(AlphaCalibration {
        alpha: checks[mid].alpha,
        feasible_range: (checks[lo].alpha, checks[hi].alpha),
        checks,
    })
}
