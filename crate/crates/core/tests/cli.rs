use std::fs;
use std::path::Path;

use clustsel::cli::{run_cli_with, Recommendation, EXIT_DATA, EXIT_OK, EXIT_USAGE};
use clustsel::pipeline::{checksums, ConfigEntry, Generator, Manifest};

fn run(args: &[&str]) -> (i32, String, String) {
    let (mut o, mut e) = (Vec::new(), Vec::new());
    let code = run_cli_with(std::iter::once("clustsel").chain(args.iter().copied()), &mut o, &mut e);
    (code, String::from_utf8(o).unwrap(), String::from_utf8(e).unwrap())
}

fn help_text() -> String {
    let mut all = String::new();
    for sub in [None, Some("generate"), Some("label"), Some("train"), Some("evaluate"), Some("ablate"), Some("recommend"), Some("report")] {
        let args: Vec<&str> = sub.into_iter().chain(["--help"]).collect();
        let (code, out, _) = run(&args);
        assert_eq!(code, EXIT_OK);
        all.push_str(&format!("==> {}\n{out}\n", sub.unwrap_or("clustsel")));
    }
    all
}

#[test]
fn help_matches_golden() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden/help.txt");
    let got = help_text();
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        fs::write(&path, &got).unwrap();
    }
    assert_eq!(got, fs::read_to_string(&path).unwrap());
}

#[test]
fn help_lists_every_flag_with_default() {
    let h = help_text();
    for flag in ["--manifest", "--out", "--repo", "--weights", "--seed", "--jobs", "--selector", "--k-range", "--tau", "--epochs", "--ablation", "--json"] {
        assert!(h.contains(flag), "{flag}");
    }
    for line in h.lines().filter(|l| l.trim_start().starts_with("--") && !l.contains("--json") && !l.contains("--help")) {
        assert!(line.contains("[default:"), "{line}");
    }
}

fn tiny_manifest(path: &Path) {
    let m = Manifest {
        seed: 3,
        grid_subsample: 2,
        grid_n_init: 1,
        pad: (32, 16),
        configs: vec![
            ConfigEntry { id: "a".into(), count: 6, generator: Generator::Scenario1 { k: 2, n: 30, d: 2, ne: 15, alpha: 4.0 } },
            ConfigEntry { id: "b".into(), count: 6, generator: Generator::Scenario1 { k: 3, n: 30, d: 3, ne: 10, alpha: 2.0 } },
        ],
        ..Manifest::empty("tiny")
    };
    fs::write(path, serde_json::to_string_pretty(&m).unwrap()).unwrap();
}

fn mtimes(root: &Path) -> Vec<(std::path::PathBuf, std::time::SystemTime)> {
    let mut v = Vec::new();
    for dir in [root.to_path_buf(), root.join("datasets")] {
        for e in fs::read_dir(dir).unwrap() {
            let e = e.unwrap();
            if e.path().is_file() {
                v.push((e.path(), e.metadata().unwrap().modified().unwrap()));
            }
        }
    }
    v.sort();
    v
}

#[test]
fn end_to_end_on_a_tiny_repository() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("tiny.json");
    tiny_manifest(&manifest);
    let repo = dir.path().join("repo");
    let (m, r) = (manifest.to_str().unwrap(), repo.to_str().unwrap());

    let (code, out, err) = run(&["generate", "--manifest", m, "--out", r, "--jobs", "1"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.starts_with("wrote"));
    let before = mtimes(&repo);
    let (code, out, _) = run(&["generate", "--manifest", m, "--out", r, "--jobs", "2"]);
    assert_eq!(code, EXIT_OK);
    assert!(out.starts_with("up-to-date"), "{out}");
    assert_eq!(before, mtimes(&repo));

    let (code, out, err) = run(&["label", "--repo", r]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(out.contains("12 datasets"), "{out}");
    let sums = checksums(&repo).unwrap();
    assert_eq!(run(&["label", "--repo", r]).0, EXIT_OK);
    assert_eq!(sums, checksums(&repo).unwrap());

    let missing = dir.path().join("missing");
    let (code, _, err) = run(&["train", "--repo", missing.to_str().unwrap(), "--epochs", "1"]);
    assert_eq!(code, EXIT_DATA, "{err}");
    assert_eq!(err.lines().count(), 1);
}

#[test]
fn train_recommend_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("tiny.json");
    tiny_manifest(&manifest);
    let mut m: Manifest = serde_json::from_str(&fs::read_to_string(&manifest).unwrap()).unwrap();
    for c in &mut m.configs {
        c.count = 12;
    }
    fs::write(&manifest, serde_json::to_string(&m).unwrap()).unwrap();
    let repo = dir.path().join("repo");
    let r = repo.to_str().unwrap();
    assert_eq!(run(&["generate", "--manifest", manifest.to_str().unwrap(), "--out", r]).0, EXIT_OK);
    assert_eq!(run(&["label", "--repo", r, "--tau", "0.9"]).0, EXIT_OK);

    let w1 = dir.path().join("one/m.crnw");
    let w2 = dir.path().join("two/m.crnw");
    for w in [&w1, &w2] {
        let (code, out, err) = run(&["train", "--repo", r, "--epochs", "2", "--seed", "7", "--weights", w.to_str().unwrap()]);
        assert_eq!(code, EXIT_OK, "{err}");
        assert!(out.contains("model"));
    }
    assert_eq!(fs::read(&w1).unwrap(), fs::read(&w2).unwrap());
    let curves = fs::read_to_string(dir.path().join("one/m.curves.csv")).unwrap();
    assert!(curves.starts_with("fold,epoch,split,bce,f1,hamming"));

    let report = dir.path().join("one/m.report.json");
    let (code, table, _) = run(&["report", report.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK);
    for name in ["model", "sil", "ch", "db", "dunn"] {
        assert!(table.contains(name));
    }
    let (code, json, _) = run(&["report", report.to_str().unwrap(), "--json"]);
    assert_eq!(code, EXIT_OK);
    assert!(serde_json::from_str::<serde_json::Value>(&json).is_ok());

    let (code, out, err) = run(&["evaluate", "--repo", r, "--weights", w1.to_str().unwrap(), "--json"]);
    assert_eq!(code, EXIT_OK, "{err}");
    assert!(serde_json::from_str::<serde_json::Value>(&out).unwrap()["methods"].is_array());

    let iris = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/iris.csv");
    let (code, out, err) = run(&["recommend", iris.to_str().unwrap(), "--selector", "ch", "--k-range", "2:4", "--weights", w1.to_str().unwrap()]);
    assert_eq!(code, EXIT_OK, "{err}");
    let rec: Recommendation = serde_json::from_str(&out).unwrap();
    assert_eq!(rec.scores.len(), 10);
    assert!((2..=4).contains(&rec.k));
    assert_eq!(rec.ranked.len(), 10);
    assert!(rec.ari.is_some());
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    for key in ["algorithm", "k", "hyperparams", "scores"] {
        assert!(v.get(key).is_some(), "{key}");
    }

    let (code, _, _) = run(&["recommend", iris.to_str().unwrap(), "--k-range", "5:2", "--weights", w1.to_str().unwrap()]);
    assert_eq!(code, EXIT_USAGE);
    let (code, _, _) = run(&["recommend", iris.to_str().unwrap(), "--weights", report.to_str().unwrap()]);
    assert_eq!(code, EXIT_DATA);
}
