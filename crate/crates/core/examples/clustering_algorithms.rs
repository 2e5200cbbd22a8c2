//! Run all ten algorithms with default settings on one dataset and score
//! them against the generating labels.

use clustsel::clusterlib::{cluster, Algorithm, AlgorithmSpec};
use clustsel::synthgen::{gen_scenario2, zscore_normalize, RadialLaw, Scenario2Params};
use clustsel::validity::ari;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let d = gen_scenario2(&Scenario2Params {
        k: 4,
        n: 300,
        d: 2,
        overlap_min: 0.005,
        overlap_max: 0.05,
        aspect_ratio: 3.0,
        radius_ratio: 2.0,
        distribution: RadialLaw::Normal,
        imbalance_ratio: 2.0,
        seed: 7,
    })?;
    let z = zscore_normalize(&d);
    let truth = d.y_true.clone().expect("generated data is labelled");

    println!("{:<14} {:>8} {:>9} {:>7}", "algorithm", "ARI", "clusters", "noise");
    for algo in Algorithm::ALL {
        let spec = AlgorithmSpec::new(algo, 4).with_seed(3);
        let labels = cluster(&z, &spec)?;
        let l = labels.as_slice();
        let k = l.iter().copied().max().map_or(0, |m| m + 1);
        let noise = l.iter().filter(|&&v| v < 0).count();
        println!("{:<14} {:>8.4} {:>9} {:>7}", algo.name(), ari(&truth, l)?, k, noise);
    }
    Ok(())
}
