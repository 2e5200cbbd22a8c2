use std::collections::BTreeMap;

use rand::Rng;

use super::*;
use crate::matrix::Matrix;
use crate::neuralnet::{ArchConfig, RecommenderNet};
use crate::rng::rng_for;
use crate::synthgen::{Dataset, Provenance};

fn fake_repo(ari: Vec<[f64; N_ALGOS]>) -> Repository {
    let n = ari.len();
    let d = Dataset::new(Matrix::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]), None, Provenance::external("fake")).unwrap();
    let datasets = (0..n)
        .map(|i| DatasetEntry { id: format!("f-{i:04}"), config: "f".into(), seed: i as u64, rows: 2, cols: 2, k: 2, sha256: String::new() })
        .collect();
    let labels = ari.iter().map(|r| derive_labels(r, DEFAULT_TAU)).collect();
    Repository {
        index: RepoIndex { manifest: Manifest::empty("fake"), datasets, flagged: n == 0 },
        datasets: vec![d; n],
        cvi: vec![[[f64::NAN; 4]; N_ALGOS]; n],
        ari,
        labels,
        specs: BTreeMap::new(),
        failed_runs: 0,
    }
}

fn random_ari(n: usize, seed: u64) -> Vec<[f64; N_ALGOS]> {
    let mut rng = rng_for(seed, "test-ari", 0);
    (0..n)
        .map(|_| {
            let mut r = [0.0; N_ALGOS];
            for v in &mut r {
                *v = rng.gen_range(-0.1..1.0);
            }
            r
        })
        .collect()
}

fn tiny_manifest(seed: u64) -> Manifest {
    Manifest {
        seed,
        grid_subsample: 2,
        grid_n_init: 1,
        configs: vec![ConfigEntry {
            id: "tiny".into(),
            count: 3,
            generator: Generator::Scenario1 { k: 2, n: 40, d: 2, ne: 20, alpha: 3.0 },
        }],
        ..Manifest::empty("tiny")
    }
}

#[test]
fn empty_manifest_gives_flagged_repository() {
    let dir = tempfile::tempdir().unwrap();
    let repo = build_repository(&Manifest::empty("nothing"), dir.path()).unwrap();
    assert!(repo.is_empty());
    assert!(repo.flagged());
    assert!(load_repository(dir.path()).unwrap().is_empty());
}

#[test]
fn rebuild_changes_no_checksums() {
    let dir = tempfile::tempdir().unwrap();
    let m = tiny_manifest(5);
    let first = build_repository(&m, dir.path()).unwrap();
    let before = checksums(dir.path()).unwrap();
    assert!(before.contains_key("ari.csv") && before.contains_key("labels.csv") && before.contains_key("specs.json"));
    assert!(generate_datasets(&m, dir.path()).unwrap().up_to_date());
    let (second, summary) = label_repository(dir.path()).unwrap();
    assert!(summary.up_to_date());
    assert_eq!(before, checksums(dir.path()).unwrap());
    assert_eq!(first.ari, second.ari);
    assert_eq!(load_repository(dir.path()).unwrap().ari, first.ari);
}

#[test]
fn repository_invariants() {
    let dir = tempfile::tempdir().unwrap();
    let repo = build_repository(&tiny_manifest(9), dir.path()).unwrap();
    assert_eq!(repo.len(), 3);
    for (a, l) in repo.ari.iter().zip(&repo.labels) {
        assert!(a.iter().all(|v| (-1.0..=1.0).contains(v)));
        assert!(l.iter().any(|&b| b));
    }
    assert_eq!(repo.specs["tiny"].len(), N_ALGOS);
}

#[test]
fn tampered_dataset_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let repo = build_repository(&tiny_manifest(3), dir.path()).unwrap();
    let p = dir.path().join("datasets").join(format!("{}.csv", repo.index.datasets[0].id));
    let mut text = std::fs::read_to_string(&p).unwrap();
    text.push_str("0,0,0\n");
    std::fs::write(&p, text).unwrap();
    assert!(matches!(load_repository(dir.path()), Err(PipelineError::Checksum(_))));
}

#[test]
fn calibration_failure_names_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut m = tiny_manifest(0);
    m.configs[0].generator = Generator::Scenario1 { k: 2, n: 41, d: 2, ne: 20, alpha: 3.0 };
    match generate_datasets(&m, dir.path()) {
        Err(PipelineError::Generation { config, .. }) => assert_eq!(config, "tiny"),
        other => panic!("{other:?}"),
    }
}

fn all_rows(n: usize) -> (Vec<usize>, Vec<usize>) {
    ((0..n).collect(), (0..n).map(|i| i % 5).collect())
}

#[test]
fn perfect_predictor() {
    let repo = fake_repo(random_ari(60, 1));
    let (rows, folds) = all_rows(60);
    let sel: Vec<usize> = repo.ari.iter().map(|r| argmax(r)).collect();
    let m = evaluate_method(&repo, "p", &rows, &repo.labels, &sel, &folds).unwrap();
    assert_eq!(m.metrics.f1, 1.0);
    assert_eq!(m.metrics.hamming, 0.0);
    let best: f64 = repo.ari.iter().map(|r| r.iter().cloned().fold(f64::MIN, f64::max)).sum::<f64>() / 60.0;
    assert!((m.metrics.mean_ari - best).abs() < 1e-12);
    assert_eq!(m.metrics.fold_f1.len(), 5);
}

#[test]
fn inverted_predictor() {
    let repo = fake_repo(random_ari(40, 2));
    let (rows, folds) = all_rows(40);
    let inv: Vec<[bool; N_ALGOS]> = repo.labels.iter().map(|r| r.map(|b| !b)).collect();
    let m = evaluate_method(&repo, "inv", &rows, &inv, &vec![0; 40], &folds).unwrap();
    assert_eq!(m.metrics.f1, 0.0);
    assert_eq!(m.metrics.hamming, 1.0);
}

#[test]
fn confusion_rows_are_normalised() {
    let repo = fake_repo(random_ari(50, 3));
    let (rows, folds) = all_rows(50);
    let mut rng = rng_for(3, "test-pred", 0);
    let pred: Vec<[bool; N_ALGOS]> = (0..50).map(|_| std::array::from_fn(|_| rng.gen_bool(0.5))).collect();
    let m = evaluate_method(&repo, "r", &rows, &pred, &vec![1; 50], &folds).unwrap();
    assert_eq!(m.confusion.len(), N_ALGOS);
    for c in &m.confusion {
        for (r, counts) in c.rows.iter().zip(c.counts) {
            match r {
                Some(r) => assert!((r[0] + r[1] - 1.0).abs() < 1e-9),
                None => assert_eq!(counts, [0, 0]),
            }
        }
        assert_eq!(c.counts.iter().flatten().sum::<usize>(), 50);
    }
}

#[test]
fn random_predictions_hamming_matches_expectation() {
    // With fair-coin predictions every bit disagrees with probability 1/2.
    for seed in 0..5 {
        let repo = fake_repo(random_ari(200, 10 + seed));
        let (rows, folds) = all_rows(200);
        let mut rng = rng_for(seed, "test-pred", 1);
        let pred: Vec<[bool; N_ALGOS]> = (0..200).map(|_| std::array::from_fn(|_| rng.gen_bool(0.5))).collect();
        let m = evaluate_method(&repo, "r", &rows, &pred, &vec![0; 200], &folds).unwrap();
        assert!((m.metrics.hamming - 0.5).abs() < 0.05, "{}", m.metrics.hamming);
    }
}

#[test]
fn shape_mismatch_is_an_error() {
    let repo = fake_repo(random_ari(5, 4));
    let (rows, folds) = all_rows(5);
    assert!(evaluate_method(&repo, "x", &rows, &repo.labels[..4], &[0; 5], &folds).is_err());
}

#[test]
fn argmax_policy_dominates_fixed_policies() {
    let repo = fake_repo(random_ari(80, 6));
    let (rows, folds) = all_rows(80);
    let best = evaluate_method(&repo, "o", &rows, &repo.labels, &repo.ari.iter().map(|r| argmax(r)).collect::<Vec<_>>(), &folds).unwrap();
    for a in 0..N_ALGOS {
        let fixed = evaluate_method(&repo, "f", &rows, &repo.labels, &vec![a; 80], &folds).unwrap();
        assert!(best.metrics.mean_ari >= fixed.metrics.mean_ari);
    }
}

#[test]
fn compare_tests_first_method_against_rest() {
    let repo = fake_repo(random_ari(50, 7));
    let (rows, folds) = all_rows(50);
    let sel: Vec<usize> = repo.ari.iter().map(|r| argmax(r)).collect();
    let good = evaluate_method(&repo, "good", &rows, &repo.labels, &sel, &folds).unwrap();
    let inv: Vec<[bool; N_ALGOS]> = repo.labels.iter().map(|r| r.map(|b| !b)).collect();
    let bad = evaluate_method(&repo, "bad", &rows, &inv, &vec![0; 50], &folds).unwrap();
    let same = good.clone();
    let rep = compare(vec![good, bad, same]);
    assert_eq!(rep.wilcoxon.len(), 6);
    let f1_bad = rep.wilcoxon.iter().find(|w| w.baseline == "bad" && w.metric == "f1").unwrap();
    // Five folds all favouring one side: two-sided exact p = 2/32.
    assert!((f1_bad.p_value.unwrap() - 0.0625).abs() < 1e-12);
    assert!(rep.wilcoxon.iter().filter(|w| w.baseline == "good").all(|w| w.p_value.is_none()));
    assert!(rep.table().contains("bad"));
}

#[test]
fn realdata_on_three_points() {
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for (c, p) in [[0.0, 0.0], [5.0, 0.0], [0.0, 5.0]].iter().enumerate() {
        for _ in 0..10 {
            rows.push(p.to_vec());
            y.push(c as i32);
        }
    }
    let d = Dataset::new(Matrix::from_rows(&rows), Some(y), Provenance::external("three")).unwrap();
    // Untrained nets with different seeds recommend different algorithms.
    let mut saw_k_algorithm = false;
    for seed in 0..6 {
        let net = RecommenderNet::new(ArchConfig::with_input(32, 16), seed).unwrap();
        let o = realdata_pipeline(&d, &net, Selector::Ch, &[2, 3, 4], seed).unwrap();
        assert_eq!(o.scores.len(), N_ALGOS);
        if o.algorithm.takes_k() {
            saw_k_algorithm = true;
            assert_eq!(o.k, 3, "{:?} {:?}", o.algorithm, o.k_scores);
            assert!((o.ari.unwrap() - 1.0).abs() < 1e-12, "{:?}", o.algorithm);
        }
    }
    assert!(saw_k_algorithm);
}

#[test]
fn realdata_singleton_range() {
    let mut rng = rng_for(1, "test-real", 0);
    let rows: Vec<Vec<f64>> = (0..40).map(|i| vec![(i % 2) as f64 * 6.0 + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
    let d = Dataset::new(Matrix::from_rows(&rows), None, Provenance::external("two")).unwrap();
    let net = RecommenderNet::new(ArchConfig::with_input(64, 16), 1).unwrap();
    let o = realdata_pipeline(&d, &net, Selector::Sil, &[2], 1).unwrap();
    assert_eq!(o.k, 2);
    assert_eq!(o.k_scores.len(), 1);
    assert!(o.ari.is_none());
    assert_eq!(o.labels.len(), 40);
    assert!(realdata_pipeline(&d, &net, Selector::Sil, &[], 1).is_err());
}

#[test]
fn selector_parsing() {
    assert_eq!("CH".parse::<Selector>().unwrap(), Selector::Ch);
    assert_eq!("sil".parse::<Selector>().unwrap(), Selector::Sil);
    assert!("db".parse::<Selector>().is_err());
}

#[test]
fn spec_scores_survive_a_json_round_trip() {
    // The default float parser loses the last digit of values like this one,
    // which made a second build rewrite specs.json.
    let v: f64 = 0.37914913225615277;
    let back: f64 = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(v.to_bits(), back.to_bits());
}
