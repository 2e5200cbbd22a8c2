//! On-disk repository of generated datasets, their ARI rows and labels.
//!
//! ```text
//! repo/manifest.json       manifest plus one entry (and checksum) per dataset
//! repo/datasets/<id>.csv
//! repo/ari.csv             dataset_id + one ARI column per algorithm
//! repo/labels.csv          dataset_id + one 0/1 column per algorithm
//! repo/cvi.csv             dataset_id, algorithm, sil, ch, db, dunn
//! repo/specs.json          search winners per configuration
//! ```

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::labels::derive_labels;
use super::manifest::Manifest;
use super::PipelineError;
use crate::clusterlib::{cluster, grid_search_config, Algorithm, AlgorithmSpec, HyperparamGrid};
use crate::neuralnet::Sample;
use crate::rng::{rng_for, substream};
use crate::synthgen::{fit_to, read_dataset_str, write_dataset_csv, zscore_normalize, Dataset};
use crate::validity::{ari, Cvi};

pub const N_ALGOS: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub id: String,
    pub config: String,
    pub seed: u64,
    pub rows: usize,
    pub cols: usize,
    pub k: usize,
    pub sha256: String,
}

/// Contents of `manifest.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepoIndex {
    pub manifest: Manifest,
    pub datasets: Vec<DatasetEntry>,
    /// Set when the repository holds no datasets.
    pub flagged: bool,
}

/// Search winner for one (configuration, algorithm).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecChoice {
    pub spec: AlgorithmSpec,
    pub mean_ari: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Repository {
    pub index: RepoIndex,
    /// Datasets exactly as stored on disk.
    pub datasets: Vec<Dataset>,
    pub ari: Vec<[f64; N_ALGOS]>,
    pub labels: Vec<[bool; N_ALGOS]>,
    /// Raw index values per (dataset, algorithm) in [`Cvi::ALL`] order; NaN when undefined.
    pub cvi: Vec<[[f64; 4]; N_ALGOS]>,
    pub specs: BTreeMap<String, Vec<SpecChoice>>,
    /// Clustering runs that failed and were scored ARI 0.
    pub failed_runs: usize,
}

impl Repository {
    pub fn len(&self) -> usize {
        self.datasets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.datasets.is_empty()
    }

    pub fn flagged(&self) -> bool {
        self.index.flagged
    }

    /// Re-derive the label bits with another threshold.
    pub fn relabel(&mut self, tau: f64) {
        self.labels = self.ari.iter().map(|r| derive_labels(r, tau)).collect();
    }

    /// z-scored, padded model inputs with their label bits.
    pub fn samples(&self) -> Result<Vec<Sample>, PipelineError> {
        let (h, w) = self.index.manifest.pad;
        self.datasets
            .iter()
            .zip(&self.labels)
            .zip(&self.index.datasets)
            .map(|((d, l), e)| {
                let (_, view) = fit_to(&zscore_normalize(d), h, w, e.seed)?;
                Ok(Sample { input: view.data, target: l.to_vec() })
            })
            .collect()
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Write `contents` unless the file already holds exactly these bytes.
/// Returns whether the file was written.
pub fn write_if_changed(path: &Path, contents: &[u8]) -> Result<bool, PipelineError> {
    if let Ok(old) = fs::read(path) {
        if old == contents {
            return Ok(false);
        }
    }
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents)?;
    Ok(true)
}

fn dataset_path(root: &Path, id: &str) -> PathBuf {
    root.join("datasets").join(format!("{id}.csv"))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct WriteSummary {
    pub written: usize,
    pub unchanged: usize,
}

impl WriteSummary {
    fn note(&mut self, written: bool) {
        if written {
            self.written += 1;
        } else {
            self.unchanged += 1;
        }
    }

    pub fn up_to_date(&self) -> bool {
        self.written == 0
    }
}

/// Generate every dataset of `manifest` under `root` and write the index.
pub fn generate_datasets(manifest: &Manifest, root: &Path) -> Result<WriteSummary, PipelineError> {
    let mut jobs = Vec::new();
    for c in &manifest.configs {
        for i in 0..c.count {
            jobs.push((c, i));
        }
    }
    let made: Vec<(DatasetEntry, String)> = jobs
        .par_iter()
        .map(|&(c, i)| {
            let seed = manifest.dataset_seed(&c.id, i);
            let d = c.generator.generate(seed).map_err(|e| PipelineError::Generation { config: c.id.clone(), source: e })?;
            let text = write_dataset_csv(&d);
            let entry = DatasetEntry {
                id: Manifest::dataset_id(&c.id, i),
                config: c.id.clone(),
                seed,
                rows: d.n_rows(),
                cols: d.n_cols(),
                k: d.n_clusters().unwrap_or(0),
                sha256: sha256_hex(text.as_bytes()),
            };
            Ok((entry, text))
        })
        .collect::<Result<_, PipelineError>>()?;
    let mut summary = WriteSummary::default();
    fs::create_dir_all(root.join("datasets"))?;
    for (e, text) in &made {
        summary.note(write_if_changed(&dataset_path(root, &e.id), text.as_bytes())?);
    }
    let index = RepoIndex { manifest: manifest.clone(), flagged: made.is_empty(), datasets: made.into_iter().map(|(e, _)| e).collect() };
    summary.note(write_if_changed(&root.join("manifest.json"), to_json(&index)?.as_bytes())?);
    Ok(summary)
}

fn to_json<T: Serialize>(v: &T) -> Result<String, PipelineError> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

pub fn read_index(root: &Path) -> Result<RepoIndex, PipelineError> {
    let text = fs::read_to_string(root.join("manifest.json")).map_err(|e| PipelineError::MissingFile(root.join("manifest.json"), e))?;
    Ok(serde_json::from_str(&text)?)
}

fn load_datasets(root: &Path, index: &RepoIndex) -> Result<Vec<Dataset>, PipelineError> {
    index
        .datasets
        .iter()
        .map(|e| {
            let path = dataset_path(root, &e.id);
            let text = fs::read_to_string(&path).map_err(|err| PipelineError::MissingFile(path.clone(), err))?;
            if sha256_hex(text.as_bytes()) != e.sha256 {
                return Err(PipelineError::Checksum(e.id.clone()));
            }
            Ok(read_dataset_str(&text, &e.id)?)
        })
        .collect()
}

/// One dataset's computed row.
#[derive(Clone, Debug, PartialEq)]
struct Row {
    ari: [f64; N_ALGOS],
    cvi: [[f64; 4]; N_ALGOS],
    failed: usize,
}

fn score_dataset(d: &Dataset, specs: &[SpecChoice], seed: u64) -> Row {
    let z = zscore_normalize(d);
    let truth = d.y_true.clone().unwrap_or_default();
    let k = d.n_clusters().unwrap_or(1);
    let mut row = Row { ari: [0.0; N_ALGOS], cvi: [[f64::NAN; 4]; N_ALGOS], failed: 0 };
    for (a, choice) in specs.iter().enumerate() {
        let spec = AlgorithmSpec { k_clusters: k, seed, ..choice.spec.clone() };
        match cluster(&z, &spec) {
            Ok(labels) => {
                row.ari[a] = ari(&truth, labels.as_slice()).unwrap_or(0.0);
                for (c, cvi) in Cvi::ALL.iter().enumerate() {
                    row.cvi[a][c] = cvi.compute(&z.x, labels.as_slice()).unwrap_or(f64::NAN);
                }
            }
            Err(_) => row.failed += 1,
        }
    }
    row
}

fn fmt_f(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

fn parse_f(s: &str) -> Result<f64, PipelineError> {
    if s.is_empty() {
        return Ok(f64::NAN);
    }
    s.parse().map_err(|_| PipelineError::Malformed(format!("bad number {s:?}")))
}

fn ari_csv(ids: &[&str], ari: &[[f64; N_ALGOS]]) -> String {
    let mut s = String::from("dataset_id");
    for a in Algorithm::ALL {
        s.push(',');
        s.push_str(a.name());
    }
    s.push('\n');
    for (id, row) in ids.iter().zip(ari) {
        s.push_str(id);
        for v in row {
            s.push(',');
            s.push_str(&fmt_f(*v));
        }
        s.push('\n');
    }
    s
}

fn labels_csv(ids: &[&str], labels: &[[bool; N_ALGOS]]) -> String {
    let mut s = String::from("dataset_id");
    for a in Algorithm::ALL {
        s.push(',');
        s.push_str(a.name());
    }
    s.push('\n');
    for (id, row) in ids.iter().zip(labels) {
        s.push_str(id);
        for &b in row {
            s.push_str(if b { ",1" } else { ",0" });
        }
        s.push('\n');
    }
    s
}

fn cvi_csv(ids: &[&str], cvi: &[[[f64; 4]; N_ALGOS]]) -> String {
    let mut s = String::from("dataset_id,algorithm");
    for c in Cvi::ALL {
        s.push(',');
        s.push_str(c.short());
    }
    s.push('\n');
    for (id, rows) in ids.iter().zip(cvi) {
        for (a, vals) in Algorithm::ALL.iter().zip(rows) {
            s.push_str(&format!("{id},{}", a.name()));
            for v in vals {
                s.push(',');
                s.push_str(&fmt_f(*v));
            }
            s.push('\n');
        }
    }
    s
}

fn read_table(path: &Path) -> Result<Vec<Vec<String>>, PipelineError> {
    let mut rdr = csv::Reader::from_path(path)?;
    rdr.records().map(|r| Ok(r?.iter().map(str::to_string).collect())).collect()
}

/// Previously computed rows, keyed by dataset id.
fn cached_rows(root: &Path) -> BTreeMap<String, Row> {
    let mut out = BTreeMap::new();
    let (Ok(ari), Ok(cvi)) = (read_table(&root.join("ari.csv")), read_table(&root.join("cvi.csv"))) else {
        return out;
    };
    let mut cvi_by: BTreeMap<String, Vec<[f64; 4]>> = BTreeMap::new();
    for r in cvi {
        let Ok(vals) = r[2..].iter().map(|s| parse_f(s)).collect::<Result<Vec<f64>, _>>() else { return BTreeMap::new() };
        if vals.len() != 4 {
            return BTreeMap::new();
        }
        cvi_by.entry(r[0].clone()).or_default().push([vals[0], vals[1], vals[2], vals[3]]);
    }
    for r in ari {
        let Ok(vals) = r[1..].iter().map(|s| parse_f(s)).collect::<Result<Vec<f64>, _>>() else { return BTreeMap::new() };
        let Some(c) = cvi_by.remove(&r[0]) else { continue };
        if vals.len() != N_ALGOS || c.len() != N_ALGOS {
            continue;
        }
        let mut row = Row { ari: [0.0; N_ALGOS], cvi: [[0.0; 4]; N_ALGOS], failed: 0 };
        row.ari.copy_from_slice(&vals);
        row.cvi.copy_from_slice(&c);
        out.insert(r[0].clone(), row);
    }
    out
}

fn search_config(datasets: &[&Dataset], manifest: &Manifest, config_idx: usize) -> Result<Vec<SpecChoice>, PipelineError> {
    let m = manifest.grid_subsample.min(datasets.len());
    let mut pick = sample(&mut rng_for(manifest.seed, "grid-subsample", config_idx as u64), datasets.len(), m).into_vec();
    pick.sort_unstable();
    let subset: Vec<Dataset> = pick.iter().map(|&i| zscore_normalize(datasets[i])).collect();
    let grid = HyperparamGrid::desk(manifest.grid_n_init);
    let seed = substream(manifest.seed, "grid", config_idx as u64);
    Algorithm::ALL
        .iter()
        .map(|&a| {
            let r = grid_search_config(&subset, a, &grid, seed)?;
            Ok(SpecChoice { spec: r.spec, mean_ari: r.best_score })
        })
        .collect()
}

/// Search hyperparameters per configuration, cluster every dataset with
/// each winner, and write ARI, CVI and label tables. Rows whose dataset
/// checksum and configuration winners are unchanged are reused.
pub fn label_repository(root: &Path) -> Result<(Repository, WriteSummary), PipelineError> {
    let index = read_index(root)?;
    let datasets = load_datasets(root, &index)?;
    let manifest = &index.manifest;

    let old_specs: BTreeMap<String, Vec<SpecChoice>> = fs::read_to_string(root.join("specs.json"))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let mut specs = BTreeMap::new();
    for (ci, c) in manifest.configs.iter().enumerate() {
        let members: Vec<&Dataset> = index.datasets.iter().zip(&datasets).filter(|(e, _)| e.config == c.id).map(|(_, d)| d).collect();
        if members.is_empty() {
            continue;
        }
        let chosen = match old_specs.get(&c.id) {
            Some(s) if s.len() == N_ALGOS => s.clone(),
            _ => search_config(&members, manifest, ci)?,
        };
        specs.insert(c.id.clone(), chosen);
    }

    let cache = if specs == old_specs { cached_rows(root) } else { BTreeMap::new() };
    let rows: Vec<Row> = index
        .datasets
        .par_iter()
        .zip(datasets.par_iter())
        .enumerate()
        .map(|(i, (e, d))| match cache.get(&e.id) {
            Some(r) => r.clone(),
            None => score_dataset(d, &specs[&e.config], substream(manifest.seed, "cluster", i as u64)),
        })
        .collect();

    let ids: Vec<&str> = index.datasets.iter().map(|e| e.id.as_str()).collect();
    let ari: Vec<[f64; N_ALGOS]> = rows.iter().map(|r| r.ari).collect();
    let cvi: Vec<[[f64; 4]; N_ALGOS]> = rows.iter().map(|r| r.cvi).collect();
    let labels: Vec<[bool; N_ALGOS]> = ari.iter().map(|r| derive_labels(r, manifest.tau)).collect();
    let mut summary = WriteSummary::default();
    summary.note(write_if_changed(&root.join("specs.json"), to_json(&specs)?.as_bytes())?);
    summary.note(write_if_changed(&root.join("ari.csv"), ari_csv(&ids, &ari).as_bytes())?);
    summary.note(write_if_changed(&root.join("labels.csv"), labels_csv(&ids, &labels).as_bytes())?);
    summary.note(write_if_changed(&root.join("cvi.csv"), cvi_csv(&ids, &cvi).as_bytes())?);
    let failed_runs = rows.iter().map(|r| r.failed).sum();
    Ok((Repository { index, datasets, ari, labels, cvi, specs, failed_runs }, summary))
}

/// Rewrite `labels.csv` from the in-memory bits. Returns whether it changed.
pub fn write_labels(root: &Path, repo: &Repository) -> Result<bool, PipelineError> {
    let ids: Vec<&str> = repo.index.datasets.iter().map(|e| e.id.as_str()).collect();
    write_if_changed(&root.join("labels.csv"), labels_csv(&ids, &repo.labels).as_bytes())
}

/// Generate and label in one go.
pub fn build_repository(manifest: &Manifest, root: &Path) -> Result<Repository, PipelineError> {
    generate_datasets(manifest, root)?;
    Ok(label_repository(root)?.0)
}

/// Read a fully built repository without recomputing anything.
pub fn load_repository(root: &Path) -> Result<Repository, PipelineError> {
    let index = read_index(root)?;
    let datasets = load_datasets(root, &index)?;
    let specs: BTreeMap<String, Vec<SpecChoice>> = serde_json::from_str(
        &fs::read_to_string(root.join("specs.json")).map_err(|e| PipelineError::MissingFile(root.join("specs.json"), e))?,
    )?;
    let rows = cached_rows(root);
    let mut ari = Vec::with_capacity(datasets.len());
    let mut cvi = Vec::with_capacity(datasets.len());
    for e in &index.datasets {
        let r = rows.get(&e.id).ok_or_else(|| PipelineError::Malformed(format!("no ARI/CVI row for {}", e.id)))?;
        ari.push(r.ari);
        cvi.push(r.cvi);
    }
    let labels = ari.iter().map(|r| derive_labels(r, index.manifest.tau)).collect();
    Ok(Repository { index, datasets, ari, labels, cvi, specs, failed_runs: 0 })
}

/// Checksums of every file in the repository, by relative path.
pub fn checksums(root: &Path) -> Result<BTreeMap<String, String>, PipelineError> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir)? {
            let p = entry?.path();
            if p.is_dir() {
                stack.push(p);
            } else {
                let rel = p.strip_prefix(root).unwrap_or(&p).to_string_lossy().replace('\\', "/");
                out.insert(rel, sha256_hex(&fs::read(&p)?));
            }
        }
    }
    Ok(out)
}
