use serde::{Deserialize, Serialize};

use crate::rng::substream;
use crate::synthgen::{gen_scenario1, gen_scenario2, Dataset, RadialLaw, Scenario1Params, Scenario2Params, SynthError};

/// Generator settings of one configuration (everything but the seed).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum Generator {
    Scenario1 {
        k: usize,
        n: usize,
        d: usize,
        ne: usize,
        alpha: f64,
    },
    Scenario2 {
        k: usize,
        n: usize,
        d: usize,
        overlap_min: f64,
        overlap_max: f64,
        aspect_ratio: f64,
        radius_ratio: f64,
        distribution: RadialLaw,
        imbalance_ratio: f64,
    },
}

impl Generator {
    pub fn generate(&self, seed: u64) -> Result<Dataset, SynthError> {
        match *self {
            Generator::Scenario1 { k, n, d, ne, alpha } => gen_scenario1(&Scenario1Params { k, n, d, ne, alpha, seed }),
            Generator::Scenario2 {
                k,
                n,
                d,
                overlap_min,
                overlap_max,
                aspect_ratio,
                radius_ratio,
                distribution,
                imbalance_ratio,
            } => gen_scenario2(&Scenario2Params {
                k,
                n,
                d,
                overlap_min,
                overlap_max,
                aspect_ratio,
                radius_ratio,
                distribution,
                imbalance_ratio,
                seed,
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEntry {
    pub id: String,
    pub count: usize,
    #[serde(flatten)]
    pub generator: Generator,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub seed: u64,
    /// Padded model input (rows, columns).
    pub pad: (usize, usize),
    /// Datasets per configuration used for the hyperparameter search.
    pub grid_subsample: usize,
    /// Restart count for the k-means style algorithms during the search.
    pub grid_n_init: i64,
    pub tau: f64,
    pub configs: Vec<ConfigEntry>,
}

impl Manifest {
    pub fn total(&self) -> usize {
        self.configs.iter().map(|c| c.count).sum()
    }

    /// Seed of dataset `i` of configuration `config`.
    pub fn dataset_seed(&self, config: &str, i: usize) -> u64 {
        substream(self.seed, &format!("dataset:{config}"), i as u64)
    }

    pub fn dataset_id(config: &str, i: usize) -> String {
        format!("{config}-{i:04}")
    }

    pub fn empty(name: &str) -> Self {
        Manifest {
            name: name.to_string(),
            seed: 0,
            pad: (crate::synthgen::DEFAULT_PAD_H, crate::synthgen::DEFAULT_PAD_W),
            grid_subsample: 10,
            grid_n_init: 10,
            tau: 0.8,
            configs: Vec::new(),
        }
    }

    /// Four configurations of 50 datasets, two per scenario.
    pub fn desk(seed: u64) -> Self {
        let s2 = |id: &str, k, d, omin, omax, dist, imb| ConfigEntry {
            id: id.to_string(),
            count: 50,
            generator: Generator::Scenario2 {
                k,
                n: 200,
                d,
                overlap_min: omin,
                overlap_max: omax,
                aspect_ratio: 4.0,
                radius_ratio: 3.0,
                distribution: dist,
                imbalance_ratio: imb,
            },
        };
        Manifest {
            name: "desk".into(),
            seed,
            configs: vec![
                ConfigEntry { id: "s1-k3".into(), count: 50, generator: Generator::Scenario1 { k: 3, n: 150, d: 2, ne: 50, alpha: 2.0 } },
                ConfigEntry { id: "s1-k5".into(), count: 50, generator: Generator::Scenario1 { k: 5, n: 200, d: 4, ne: 40, alpha: 2.5 } },
                s2("s2-normal", 4, 2, 0.001, 0.05, RadialLaw::Normal, 2.0),
                s2("s2-student", 3, 3, 0.01, 0.1, RadialLaw::StudentT, 4.0),
            ],
            ..Manifest::empty("desk")
        }
    }

    /// The full-size corpus layout: 17 configurations of 2,000 datasets.
    pub fn reference() -> Self {
        let mut configs = Vec::new();
        for (k, d, alpha) in [(3, 2, 2.0), (5, 2, 3.0), (5, 10, 1.5), (10, 5, 3.0), (10, 20, 1.5), (20, 10, 2.5), (30, 10, 3.0)] {
            let ne = if k <= 10 { 50 } else { 20 };
            configs.push(ConfigEntry {
                id: format!("s1-k{k}-d{d}"),
                count: 2000,
                generator: Generator::Scenario1 { k, n: k * ne, d, ne, alpha },
            });
        }
        for (i, (k, dist, omax)) in [
            (3, RadialLaw::Normal, 0.05),
            (3, RadialLaw::StudentT, 0.1),
            (5, RadialLaw::Normal, 0.1),
            (5, RadialLaw::Exponential, 0.05),
            (5, RadialLaw::StudentT, 0.2),
            (10, RadialLaw::Normal, 0.05),
            (10, RadialLaw::Exponential, 0.1),
            (10, RadialLaw::StudentT, 0.1),
            (20, RadialLaw::Normal, 0.05),
            (20, RadialLaw::Exponential, 0.2),
        ]
        .into_iter()
        .enumerate()
        {
            configs.push(ConfigEntry {
                id: format!("s2-{i:02}"),
                count: 2000,
                generator: Generator::Scenario2 {
                    k,
                    n: 200.max(20 * k),
                    d: 2 + i % 3,
                    overlap_min: omax / 10.0,
                    overlap_max: omax,
                    aspect_ratio: 4.0,
                    radius_ratio: 3.0,
                    distribution: dist,
                    imbalance_ratio: 3.0,
                },
            });
        }
        Manifest { name: "reference".into(), configs, ..Manifest::empty("reference") }
    }
}
