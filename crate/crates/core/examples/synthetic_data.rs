//! Generate one dataset per scenario, normalise and pad it, and print a
//! short summary plus the first CSV lines.

use clustsel::synthgen::{
    fit_to, gen_scenario1, gen_scenario2, pairwise_overlaps, write_dataset_csv, zscore_normalize, RadialLaw, Scenario1Params,
    Scenario2Params,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let blobs = gen_scenario1(&Scenario1Params { k: 4, n: 200, d: 3, ne: 50, alpha: 3.0, seed: 1 })?;
    let ellipsoids = gen_scenario2(&Scenario2Params {
        k: 3,
        n: 240,
        d: 2,
        overlap_min: 0.01,
        overlap_max: 0.08,
        aspect_ratio: 4.0,
        radius_ratio: 3.0,
        distribution: RadialLaw::StudentT,
        imbalance_ratio: 3.0,
        seed: 2,
    })?;

    for (name, d) in [("gaussian blobs", &blobs), ("ellipsoids", &ellipsoids)] {
        let z = zscore_normalize(d);
        let (_, padded) = fit_to(&z, 256, 64, 0)?;
        let mut sizes = vec![0usize; d.n_clusters().unwrap_or(0)];
        for &l in d.y_true.as_deref().unwrap_or(&[]) {
            sizes[l as usize] += 1;
        }
        println!("{name}: {} x {}, cluster sizes {sizes:?}, padded input {} values", d.n_rows(), d.n_cols(), padded.data.len());
    }
    // measured while placing the centres; pairwise_overlaps re-estimates from the sample
    println!("ellipsoid overlaps at placement: {:.3?}", ellipsoids.meta.overlaps.as_deref().unwrap_or(&[]));
    let labels = ellipsoids.y_true.as_deref().unwrap_or(&[]);
    println!("ellipsoid overlaps in the sample:  {:.3?}", pairwise_overlaps(&ellipsoids.x, labels));

    let csv = write_dataset_csv(&blobs);
    for line in csv.lines().take(4) {
        println!("  {line}");
    }
    Ok(())
}
