//! On-disk formats: sample CSV files and snapshot directories.
//!
//! A snapshot directory holds one `snapshot_NNNN.csv` per time level
//! (columns `p1,p2,t,u`) and a `manifest.json` listing every file with its
//! SHA-256. Ground truth and training data sets share the layout.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use physreg_core::sim::GroundTruth;
use physreg_core::types::Domain;
use physreg_core::{Sample, Snapshot};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::{AppError, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataKind {
    Truth,
    Grid,
    Rand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SnapshotEntry {
    pub index: usize,
    pub t: f64,
    pub file: String,
    pub samples: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub kind: DataKind,
    pub config_hash: String,
    pub config: RunConfig,
    pub domain: Domain,
    /// Truth nodes per axis (of the source truth for data sets).
    pub grid_n: usize,
    /// Grid resolution or random sample count, for data sets.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// `false` when a grid resolution had to be snapped to nearest nodes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact_grid: Option<bool>,
    /// Hash of the truth manifest a data set was drawn from.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub snapshots: Vec<SnapshotEntry>,
}

#[derive(Serialize, Deserialize)]
struct Row {
    p1: f64,
    p2: f64,
    t: f64,
    u: f64,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn samples_to_csv(samples: &[Sample]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for s in samples {
        w.serialize(Row { p1: s.point.p1, p2: s.point.p2, t: s.point.t, u: s.u })
            .map_err(|source| AppError::Csv { path: PathBuf::from("<memory>"), source })?;
    }
    w.into_inner().map_err(|e| AppError::Config(e.to_string()))
}

pub fn samples_from_csv(bytes: &[u8], path: &Path) -> Result<Vec<Sample>> {
    let mut r = csv::Reader::from_reader(bytes);
    r.deserialize::<Row>()
        .map(|row| {
            let row = row.map_err(|source| AppError::Csv { path: path.into(), source })?;
            Ok(Sample::new(row.p1, row.p2, row.t, row.u))
        })
        .collect()
}

pub fn write_samples(path: &Path, samples: &[Sample]) -> Result<()> {
    fs::write(path, samples_to_csv(samples)?).map_err(AppError::io(path))
}

pub fn read_samples(path: &Path) -> Result<Vec<Sample>> {
    let bytes = fs::read(path).map_err(AppError::io(path))?;
    samples_from_csv(&bytes, path)
}

/// Fields of a manifest other than the snapshot list.
#[derive(Debug, Clone)]
pub struct ManifestHeader {
    pub kind: DataKind,
    pub config: RunConfig,
    pub domain: Domain,
    pub grid_n: usize,
    pub size: Option<usize>,
    pub seed: Option<u64>,
    pub exact_grid: Option<bool>,
    pub source: Option<String>,
}

/// Writes the snapshots and their manifest into `dir` (created if needed).
pub fn write_snapshot_dir(dir: &Path, header: ManifestHeader, snapshots: &[Snapshot]) -> Result<Manifest> {
    fs::create_dir_all(dir).map_err(AppError::io(dir))?;
    let mut entries = Vec::with_capacity(snapshots.len());
    for snap in snapshots {
        let file = format!("snapshot_{:04}.csv", snap.index);
        let bytes = samples_to_csv(&snap.samples)?;
        let path = dir.join(&file);
        fs::write(&path, &bytes).map_err(AppError::io(&path))?;
        entries.push(SnapshotEntry { index: snap.index, t: snap.t, file, samples: snap.len(), sha256: sha256_hex(&bytes) });
    }
    let manifest = Manifest {
        kind: header.kind,
        config_hash: header.config.hash(),
        config: header.config,
        domain: header.domain,
        grid_n: header.grid_n,
        size: header.size,
        seed: header.seed,
        exact_grid: header.exact_grid,
        source: header.source,
        snapshots: entries,
    };
    write_json(&dir.join(MANIFEST), &manifest)?;
    Ok(manifest)
}

/// Reads a snapshot directory, verifying every checksum.
pub fn read_snapshot_dir(dir: &Path) -> Result<(Manifest, Vec<Snapshot>)> {
    let mpath = dir.join(MANIFEST);
    if !mpath.is_file() {
        return Err(AppError::Config(format!("{} is not a snapshot directory (no {MANIFEST})", dir.display())));
    }
    let manifest: Manifest = read_json(&mpath)?;
    let mut snaps = Vec::with_capacity(manifest.snapshots.len());
    for e in &manifest.snapshots {
        let path = dir.join(&e.file);
        let bytes = fs::read(&path).map_err(AppError::io(&path))?;
        let actual = sha256_hex(&bytes);
        if actual != e.sha256 {
            return Err(AppError::Checksum { path, expected: e.sha256.clone(), actual });
        }
        let samples = samples_from_csv(&bytes, &path)?;
        snaps.push(Snapshot::new(e.index, e.t, samples)?);
    }
    Ok((manifest, snaps))
}

pub fn read_truth(dir: &Path) -> Result<(Manifest, GroundTruth)> {
    let (m, snaps) = read_snapshot_dir(dir)?;
    if m.kind != DataKind::Truth {
        return Err(AppError::Config(format!("{} holds a {:?} data set, not ground truth", dir.display(), m.kind)));
    }
    let truth = GroundTruth::from_snapshots(m.grid_n, m.domain, snaps)?;
    Ok((m, truth))
}

/// Hash identifying a snapshot directory: the SHA-256 of its manifest.
pub fn manifest_hash(dir: &Path) -> Result<String> {
    let path = dir.join(MANIFEST);
    Ok(sha256_hex(&fs::read(&path).map_err(AppError::io(&path))?))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|source| AppError::Json { path: path.into(), source })?;
    bytes.push(b'\n');
    let mut f = fs::File::create(path).map_err(AppError::io(path))?;
    f.write_all(&bytes).map_err(AppError::io(path))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(AppError::io(path))?;
    serde_json::from_str(&text).map_err(|source| AppError::Json { path: path.into(), source })
}
