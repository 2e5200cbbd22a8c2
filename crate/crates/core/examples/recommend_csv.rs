//! Recommend an algorithm, cluster count and hyperparameters for a CSV.
//!
//! ```text
//! cargo run --release --example recommend_csv -- data.csv model.crnw [ch|sil]
//! ```
//!
//! Without arguments the bundled iris table is used with an untrained
//! network, which is enough to see the protocol run end to end.

use std::path::PathBuf;

use clustsel::clusterlib::Algorithm;
use clustsel::neuralnet::{read_weights, ArchConfig, RecommenderNet};
use clustsel::pipeline::{realdata_pipeline, Selector, DEFAULT_K_RANGE};
use clustsel::synthgen::read_dataset_csv;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let data = args
        .first()
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/iris.csv"));
    let model = match args.get(1) {
        Some(w) => read_weights(std::io::BufReader::new(std::fs::File::open(w)?))?,
        None => RecommenderNet::new(ArchConfig::default(), 0)?,
    };
    let selector: Selector = args.get(2).map(|s| s.parse()).transpose()?.unwrap_or(Selector::Ch);

    let d = read_dataset_csv(&data)?;
    let ks: Vec<usize> = DEFAULT_K_RANGE.collect();
    let o = realdata_pipeline(&d, &model, selector, &ks, 0)?;

    println!("{}: {} rows x {} columns", data.display(), d.n_rows(), d.n_cols());
    for (algo, s) in Algorithm::ALL.iter().zip(&o.scores) {
        println!("  {:<14} {s:.3}", algo.name());
    }
    println!("recommended {} with k = {} and {:?}", o.algorithm.name(), o.k, o.spec.hyperparams);
    for (k, s) in &o.k_scores {
        println!("  k = {k:>2}  {} = {}", selector.name(), s.map_or("undefined".into(), |v| format!("{v:.3}")));
    }
    if let Some(a) = o.ari {
        println!("ARI against the label column: {a:.4}");
    }
    Ok(())
}
