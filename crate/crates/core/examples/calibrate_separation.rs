//! Find a blob separation at which no algorithm always succeeds but some
//! succeed often, then re-check it on fresh seeds.

use clustsel::clusterlib::{Algorithm, AlgorithmSpec, Clusterer};
use clustsel::synthgen::{calibrate_alpha, verify_alpha, Scenario1Base};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = Scenario1Base { k: 3, ne: 40, d: 2 };
    let specs: Vec<AlgorithmSpec> = [Algorithm::KMeans, Algorithm::Gmm, Algorithm::Ward, Algorithm::Dbscan]
        .iter()
        .map(|&a| AlgorithmSpec::new(a, base.k))
        .collect();
    let algos: Vec<&dyn Clusterer> = specs.iter().map(|s| s as &dyn Clusterer).collect();

    let cal = calibrate_alpha(&base, &algos, 10, 42)?;
    println!("alpha = {:.1} (feasible run {:.1}..{:.1})", cal.alpha, cal.feasible_range.0, cal.feasible_range.1);
    for c in cal.checks.iter().step_by(5) {
        println!("  alpha {:>4.1}  success {:.2?}  feasible {}", c.alpha, c.success_fraction, c.feasible());
    }

    let fresh: Vec<u64> = (1000..1020).collect();
    let check = verify_alpha(&base, cal.alpha, &algos, &fresh)?;
    println!("fresh seeds: success {:.2?}, feasible {}", check.success_fraction, check.feasible());
    Ok(())
}
