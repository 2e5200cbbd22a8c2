use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{ChiSquared, Distribution, Exp1, StandardNormal};

use super::overlap::overlap_with_centers;
use super::{shuffle_rows, Dataset, Provenance, RadialLaw, Scenario2Params, Source, SynthError};
use crate::matrix::Matrix;
use crate::rng::{rng_for, Rng};

const STUDENT_T_DF: f64 = 3.0;

/// Knobs of the centre-placement search.
#[derive(Clone, Copy, Debug)]
pub struct Scenario2Options {
    /// Placement rounds before giving up with `CalibrationFailure`.
    pub max_rounds: usize,
    /// Size of the per-cluster reference sample used to measure overlap.
    pub reference_points: usize,
    /// Attempts at placing one cluster inside a round.
    pub attempts_per_cluster: usize,
}

impl Default for Scenario2Options {
    fn default() -> Self {
        Scenario2Options { max_rounds: 500, reference_points: 2000, attempts_per_cluster: 20 }
    }
}

/// Cluster sizes interpolated geometrically from smallest to largest so that
/// `max / min == imbalance` (up to integer rounding) and the sizes sum to `n`.
/// Returned in ascending order.
pub fn cluster_sizes(n: usize, k: usize, imbalance: f64) -> Vec<usize> {
    assert!(k >= 1 && n >= k);
    if k == 1 {
        return vec![n];
    }
    let w: Vec<f64> = (0..k).map(|i| imbalance.powf(i as f64 / (k - 1) as f64)).collect();
    let total: f64 = w.iter().sum();
    let s_min = ((n as f64 * w[0] / total).round() as usize).max(1);
    if k == 2 {
        return vec![s_min, n - s_min];
    }
    let s_max = ((s_min as f64 * imbalance).round() as usize).max(s_min);
    let middle_total = n.saturating_sub(s_min + s_max);
    let mid_w = &w[1..k - 1];
    let mid_sum: f64 = mid_w.iter().sum();
    let raw: Vec<f64> = mid_w.iter().map(|v| middle_total as f64 * v / mid_sum).collect();
    let mut mid: Vec<usize> = raw.iter().map(|v| v.floor() as usize).collect();
    let mut rem = middle_total - mid.iter().sum::<usize>();
    // largest remainder, ties to the larger cluster
    let mut order: Vec<usize> = (0..mid.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = raw[a] - raw[a].floor();
        let fb = raw[b] - raw[b].floor();
        fb.partial_cmp(&fa).unwrap().then(b.cmp(&a))
    });
    for &i in order.iter().cycle() {
        if rem == 0 {
            break;
        }
        mid[i] += 1;
        rem -= 1;
    }
    let mut sizes = Vec::with_capacity(k);
    sizes.push(s_min);
    sizes.extend(mid);
    sizes.push(s_max);
    sizes
}

fn validate(p: &Scenario2Params) -> Result<(), SynthError> {
    let bad = |m: &str| Err(SynthError::InvalidParams(m.to_string()));
    if p.k == 0 || p.d == 0 {
        return bad("k and d must be at least 1");
    }
    if p.n < p.k {
        return bad("n must be at least k");
    }
    if !(0.0..1.0).contains(&p.overlap_min) || !(0.0..1.0).contains(&p.overlap_max) {
        return bad("overlap bounds must lie in [0, 1)");
    }
    if p.overlap_min >= p.overlap_max {
        return bad("overlap_min must be below overlap_max");
    }
    if !(p.aspect_ratio >= 1.0 && p.radius_ratio >= 1.0 && p.imbalance_ratio >= 1.0) {
        return bad("aspect, radius and imbalance ratios must be >= 1");
    }
    Ok(())
}

/// Draw a vector whose coordinates have unit variance under `law`.
fn draw_unit(law: RadialLaw, d: usize, rng: &mut Rng, out: &mut [f64]) {
    for v in out.iter_mut() {
        *v = rng.sample(StandardNormal);
    }
    match law {
        RadialLaw::Normal => {}
        RadialLaw::Exponential => {
            // uniform direction, radius ~ Exp with E[r^2] = d
            let norm = out.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
            let r: f64 = rng.sample::<f64, _>(Exp1) * (d as f64 / 2.0).sqrt();
            out.iter_mut().for_each(|v| *v *= r / norm);
        }
        RadialLaw::StudentT => {
            let chi = ChiSquared::new(STUDENT_T_DF).unwrap().sample(rng);
            let scale = (STUDENT_T_DF / chi).sqrt() * ((STUDENT_T_DF - 2.0) / STUDENT_T_DF).sqrt();
            out.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

fn random_rotation(d: usize, rng: &mut Rng) -> Matrix {
    // Gram-Schmidt on a Gaussian matrix
    let mut q = Matrix::zeros(d, d);
    for i in 0..d {
        loop {
            let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
            for j in 0..i {
                let dot: f64 = v.iter().zip(q.row(j)).map(|(a, b)| a * b).sum();
                for (vi, qj) in v.iter_mut().zip(q.row(j)) {
                    *vi -= dot * qj;
                }
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-8 {
                q.row_mut(i).iter_mut().zip(&v).for_each(|(dst, x)| *dst = x / norm);
                break;
            }
        }
    }
    q
}

/// Linear map of one cluster: rows of `basis` scaled by axis lengths.
struct Shape {
    basis: Matrix,
    lengths: Vec<f64>,
}

impl Shape {
    fn apply(&self, u: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for (a, (&ua, &la)) in u.iter().zip(&self.lengths).enumerate() {
            let s = ua * la;
            for (o, b) in out.iter_mut().zip(self.basis.row(a)) {
                *o += s * b;
            }
        }
    }
}

fn sample_cluster(shape: &Shape, law: RadialLaw, n: usize, d: usize, rng: &mut Rng) -> Matrix {
    let mut m = Matrix::zeros(n, d);
    let mut u = vec![0.0; d];
    for i in 0..n {
        draw_unit(law, d, rng, &mut u);
        shape.apply(&u, m.row_mut(i));
    }
    m
}

fn shifted(m: &Matrix, by: &[f64]) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        out.row_mut(i).iter_mut().zip(by).for_each(|(v, s)| *v += s);
    }
    out
}

fn overlap_at(refs: &[Matrix], centers: &[Vec<f64>], a: usize, b: usize) -> f64 {
    let sa = shifted(&refs[a], &centers[a]);
    let sb = shifted(&refs[b], &centers[b]);
    overlap_with_centers(&sa, &centers[a], &sb, &centers[b])
}

/// Ellipsoidal clusters with controlled overlap, shape and size spread.
pub fn gen_scenario2(p: &Scenario2Params) -> Result<Dataset, SynthError> {
    gen_scenario2_with(p, &Scenario2Options::default())
}

/// Overlap constraint: every pair of clusters overlaps at most
/// `overlap_max`, and every cluster overlaps its closest neighbour by at
/// least `overlap_min`. Overlaps are measured with [`super::estimate_overlap`]
/// semantics on large reference samples drawn from each cluster's law, using
/// the true centres.
pub fn gen_scenario2_with(p: &Scenario2Params, opts: &Scenario2Options) -> Result<Dataset, SynthError> {
    validate(p)?;
    let (k, d) = (p.k, p.d);
    let mut rng = rng_for(p.seed, "scenario2", 0);

    let mut sizes = cluster_sizes(p.n, k, p.imbalance_ratio);
    sizes.shuffle(&mut rng);
    let mut radii: Vec<f64> = (0..k)
        .map(|i| if k == 1 { 1.0 } else { p.radius_ratio.powf(i as f64 / (k - 1) as f64) })
        .collect();
    radii.shuffle(&mut rng);
    let profile: Vec<f64> = (0..d)
        .map(|j| if d == 1 { 1.0 } else { p.aspect_ratio.powf(j as f64 / (d - 1) as f64 - 0.5) })
        .collect();
    let shapes: Vec<Shape> = radii
        .iter()
        .map(|&r| Shape { basis: random_rotation(d, &mut rng), lengths: profile.iter().map(|l| l * r).collect() })
        .collect();
    let mut ref_rng = rng_for(p.seed, "scenario2-reference", 0);
    let refs: Vec<Matrix> = shapes
        .iter()
        .map(|s| sample_cluster(s, p.distribution, opts.reference_points, d, &mut ref_rng))
        .collect();

    let centers = if k == 1 {
        vec![vec![0.0; d]]
    } else {
        place_centers(p, opts, &refs, &radii, &mut rng)?
    };

    let mut overlaps = Vec::new();
    for a in 0..k {
        for b in a + 1..k {
            overlaps.push(overlap_at(&refs, &centers, a, b));
        }
    }

    let mut x = Matrix::zeros(p.n, d);
    let mut y = Vec::with_capacity(p.n);
    let mut row = 0;
    let mut u = vec![0.0; d];
    for c in 0..k {
        for _ in 0..sizes[c] {
            draw_unit(p.distribution, d, &mut rng, &mut u);
            let dst = x.row_mut(row);
            shapes[c].apply(&u, dst);
            dst.iter_mut().zip(&centers[c]).for_each(|(v, m)| *v += m);
            y.push(c as i32);
            row += 1;
        }
    }
    let (x, y) = shuffle_rows(x, y, &mut rng);
    Dataset::new(
        x,
        Some(y),
        Provenance { source: Source::Scenario2(p.clone()), subsample_seed: None, overlaps: Some(overlaps) },
    )
}

fn place_centers(
    p: &Scenario2Params,
    opts: &Scenario2Options,
    refs: &[Matrix],
    radii: &[f64],
    rng: &mut Rng,
) -> Result<Vec<Vec<f64>>, SynthError> {
    let (k, d) = (p.k, p.d);
    let spread = radii.iter().cloned().fold(0.0, f64::max) * (d as f64).sqrt();
    'round: for _ in 0..opts.max_rounds {
        let mut centers: Vec<Vec<f64>> = vec![vec![0.0; d]];
        for c in 1..k {
            let mut placed = false;
            for _ in 0..opts.attempts_per_cluster {
                let anchor = rng.gen_range(0..c);
                let target = rng.gen_range(p.overlap_min..p.overlap_max);
                let mut dir: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-12);
                dir.iter_mut().for_each(|v| *v /= norm);

                let mut trial = centers.clone();
                trial.push(vec![0.0; d]);
                let at = |s: f64, trial: &mut Vec<Vec<f64>>| {
                    for j in 0..d {
                        trial[c][j] = centers[anchor][j] + s * dir[j];
                    }
                    overlap_at(refs, trial, anchor, c)
                };
                // overlap decreases with distance; bracket then bisect
                let mut hi = spread.max(1e-3);
                let mut guard = 0;
                while at(hi, &mut trial) > target && guard < 60 {
                    hi *= 2.0;
                    guard += 1;
                }
                let mut lo = 0.0;
                let mut s = hi;
                let mut ok = false;
                for _ in 0..80 {
                    s = 0.5 * (lo + hi);
                    let o = at(s, &mut trial);
                    if o >= p.overlap_min && o <= p.overlap_max && (o - target).abs() <= 0.5 * (p.overlap_max - p.overlap_min) {
                        ok = true;
                        break;
                    }
                    if o > target {
                        lo = s;
                    } else {
                        hi = s;
                    }
                }
                if !ok {
                    let o = at(s, &mut trial);
                    ok = o >= p.overlap_min && o <= p.overlap_max;
                }
                if !ok {
                    continue;
                }
                at(s, &mut trial);
                let fits = (0..c).all(|j| j == anchor || overlap_at(refs, &trial, j, c) <= p.overlap_max);
                if fits {
                    centers = trial;
                    placed = true;
                    break;
                }
            }
            if !placed {
                continue 'round;
            }
        }
        return Ok(centers);
    }
    Err(SynthError::CalibrationFailure { rounds: opts.max_rounds })
}
