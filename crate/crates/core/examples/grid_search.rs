//! Pick hyperparameters per algorithm by mean ARI over a handful of
//! datasets from one configuration.

use clustsel::clusterlib::{grid_search_config, Algorithm, HyperparamGrid};
use clustsel::synthgen::{gen_scenario1, zscore_normalize, Scenario1Params};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let datasets = (0..5)
        .map(|seed| gen_scenario1(&Scenario1Params { k: 3, n: 120, d: 2, ne: 40, alpha: 2.5, seed }).map(|d| zscore_normalize(&d)))
        .collect::<Result<Vec<_>, _>>()?;
    let grid = HyperparamGrid::desk(5);

    for algo in [Algorithm::Dbscan, Algorithm::Birch, Algorithm::Agglomerative, Algorithm::Gmm] {
        let r = grid_search_config(&datasets, algo, &grid, 11)?;
        println!("{:<14} {} grid points, best mean ARI {:.4} with {:?}", algo.name(), r.scores.len(), r.best_score, r.spec.hyperparams);
    }
    Ok(())
}
