//! Internal indices, ARI, multi-label scores and a paired signed-rank
//! test on small hand-made inputs.

use clustsel::validity::{ari, f1_micro, hamming, wilcoxon_signed_rank, Cvi};
use clustsel::Matrix;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let x = Matrix::from_rows(&[
        vec![0.0, 0.0],
        vec![0.2, 0.1],
        vec![0.1, 0.3],
        vec![4.0, 4.0],
        vec![4.2, 3.9],
        vec![3.8, 4.1],
    ]);
    let good = [0, 0, 0, 1, 1, 1];
    let bad = [0, 1, 0, 1, 0, 1];
    for cvi in Cvi::ALL {
        let better = if cvi.higher_is_better() { "higher" } else { "lower" };
        println!("{:<5} good {:>9.4}  bad {:>9.4}  ({better} is better)", cvi.short(), cvi.compute(&x, &good)?, cvi.compute(&x, &bad)?);
    }
    println!("ARI good vs bad: {:.4}", ari(&good, &bad)?);

    let truth = vec![vec![true, false, true], vec![false, true, false]];
    let pred = vec![vec![true, false, false], vec![false, true, true]];
    println!("micro-F1 {:.4}, Hamming {:.4}", f1_micro(&truth, &pred)?, hamming(&truth, &pred)?);

    let model = [0.81, 0.79, 0.84, 0.80, 0.83, 0.82];
    let baseline = [0.40, 0.38, 0.45, 0.36, 0.41, 0.39];
    let w = wilcoxon_signed_rank(&model, &baseline)?;
    println!("signed-rank: W+ = {}, n = {}, p = {:.5} (exact: {})", w.w_plus, w.n, w.p_value, w.exact);
    Ok(())
}
