//! Train the full network and the three single-block-removed variants on
//! the same folds, then compare selected-algorithm ARI.
//!
//! ```text
//! cargo run --release --example ablation_study [repo-dir]
//! ```

use std::path::PathBuf;

use clustsel::neuralnet::TrainConfig;
use clustsel::pipeline::{build_repository, run_ablations, ConfigEntry, Generator, Manifest};
use clustsel::synthgen::read_dataset_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| std::env::temp_dir().join("clustsel-ablation-repo"));
    let manifest = Manifest {
        seed: 9,
        pad: (128, 16),
        grid_subsample: 4,
        grid_n_init: 3,
        configs: vec![
            ConfigEntry { id: "k3".into(), count: 25, generator: Generator::Scenario1 { k: 3, n: 90, d: 2, ne: 30, alpha: 2.0 } },
            ConfigEntry { id: "k4".into(), count: 25, generator: Generator::Scenario1 { k: 4, n: 120, d: 3, ne: 30, alpha: 2.5 } },
        ],
        ..Manifest::empty("ablation")
    };
    let repo = build_repository(&manifest, &dir)?;
    let iris = read_dataset_csv(&PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/iris.csv"))?;

    let cfg = TrainConfig { epochs: 8, folds: 5, lr: 1e-3, seed: 2, ..TrainConfig::default() };
    let (rows, _) = run_ablations(&repo, &repo.samples()?, &cfg, &[iris], &[2, 3, 4, 5])?;

    println!("{:<10} {:>10} {:>10} {:>10} {:>10}", "variant", "mean ARI", "median", "iris CH", "iris Sil");
    for r in &rows {
        let real: Vec<String> = r.real.iter().map(|s| format!("{:>10.4}", s.mean)).collect();
        println!("{:<10} {:>10.4} {:>10.4} {}", r.variant.name(), r.desk_mean, r.desk_median, real.join(" "));
    }
    Ok(())
}
