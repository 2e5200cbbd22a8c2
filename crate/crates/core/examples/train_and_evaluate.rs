//! Build a small repository, train the recommender with cross-validation
//! and compare it against the validity-index baselines.
//!
//! ```text
//! cargo run --release --example train_and_evaluate [repo-dir]
//! ```

use std::path::PathBuf;

use clustsel::neuralnet::{write_weights, ArchConfig, Split, TrainConfig};
use clustsel::pipeline::{build_repository, run_experiment, ConfigEntry, Generator, Manifest};
use clustsel::synthgen::RadialLaw;

fn small_manifest() -> Manifest {
    Manifest {
        seed: 5,
        pad: (128, 16),
        grid_subsample: 4,
        grid_n_init: 3,
        configs: vec![
            ConfigEntry { id: "blobs".into(), count: 30, generator: Generator::Scenario1 { k: 3, n: 90, d: 2, ne: 30, alpha: 2.5 } },
            ConfigEntry {
                id: "heavy-tails".into(),
                count: 30,
                generator: Generator::Scenario2 {
                    k: 3,
                    n: 120,
                    d: 2,
                    overlap_min: 0.01,
                    overlap_max: 0.1,
                    aspect_ratio: 4.0,
                    radius_ratio: 3.0,
                    distribution: RadialLaw::StudentT,
                    imbalance_ratio: 3.0,
                },
            },
        ],
        ..Manifest::empty("small")
    }
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("clustsel-small-repo"));
    let manifest = small_manifest();
    let repo = build_repository(&manifest, &dir)?;
    println!("repository: {} datasets in {}", repo.len(), dir.display());

    let (h, w) = manifest.pad;
    let cfg = TrainConfig { epochs: 10, folds: 5, lr: 1e-3, seed: 1, ..TrainConfig::default() };
    let r = run_experiment(&repo, &repo.samples()?, &ArchConfig::with_input(h, w), &cfg)?;
    print!("{}", r.report.table());

    let bce = r.curves.mean_by_epoch(Split::Validation, |p| p.bce);
    println!("validation BCE by epoch: {:.3?}", bce);
    if let Some(h) = &r.holdout {
        println!("held-out: F1 {:.3}, mean ARI {:.3}", h.metrics.f1, h.metrics.mean_ari);
    }

    let weights = dir.join("small.crnw");
    write_weights(&r.model, std::fs::File::create(&weights)?)?;
    println!("weights written to {}", weights.display());
    Ok(())
}
