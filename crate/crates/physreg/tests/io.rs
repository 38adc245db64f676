use std::fs;

use physreg::config::RunConfig;
use physreg::error::AppError;
use physreg::io::{read_snapshot_dir, read_truth, write_snapshot_dir, DataKind, ManifestHeader};
use physreg_core::sim::{simulate, SimConfig};
use physreg_core::{RdsParams, Sample, Snapshot};

fn header(kind: DataKind, grid_n: usize) -> ManifestHeader {
    let config = RunConfig::default();
    ManifestHeader {
        kind,
        domain: config.sim.domain,
        config,
        grid_n,
        size: None,
        seed: None,
        exact_grid: None,
        source: None,
    }
}

fn awkward_snapshots() -> Vec<Snapshot> {
    // values that only survive a text round trip with shortest-repr printing
    (0..3)
        .map(|k| {
            let t = 0.1 * k as f64 + 0.2 * k as f64;
            let samples = (0..4)
                .map(|i| Sample::new(i as f64 / 3.0, 1.0 - i as f64 * 0.1, t, (i as f64 + 0.7).ln() * 1e-17))
                .collect();
            Snapshot::new(k, t, samples).unwrap()
        })
        .collect()
}

#[test]
fn snapshot_directories_round_trip_bit_for_bit() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = awkward_snapshots();
    let m = write_snapshot_dir(dir.path(), header(DataKind::Grid, 2), &snaps).unwrap();
    assert_eq!(m.snapshots.len(), 3);
    let (back_m, back) = read_snapshot_dir(dir.path()).unwrap();
    assert_eq!(back_m.kind, DataKind::Grid);
    assert_eq!(back, snaps);
}

#[test]
fn tampered_snapshot_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let m = write_snapshot_dir(dir.path(), header(DataKind::Grid, 2), &awkward_snapshots()).unwrap();
    let file = dir.path().join(&m.snapshots[1].file);
    let text = fs::read_to_string(&file).unwrap();
    fs::write(&file, text.replacen('0', "1", 1)).unwrap();
    let err = read_snapshot_dir(dir.path()).unwrap_err();
    assert!(matches!(err, AppError::Checksum { .. }), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn truth_round_trip_keeps_the_lattice() {
    let cfg = SimConfig { grid_n: 9, horizon: 2, ..Default::default() };
    let truth = simulate(&cfg, &RdsParams::default()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_snapshot_dir(dir.path(), header(DataKind::Truth, 9), &truth.snapshots).unwrap();
    let (_, back) = read_truth(dir.path()).unwrap();
    assert_eq!(back.grid_n, 9);
    assert_eq!(back.snapshots, truth.snapshots);
    assert_eq!(back.lattice(1, 4).samples.len(), 9);
}

#[test]
fn a_training_set_is_not_ground_truth() {
    let dir = tempfile::tempdir().unwrap();
    write_snapshot_dir(dir.path(), header(DataKind::Rand, 2), &awkward_snapshots()).unwrap();
    assert_eq!(read_truth(dir.path()).unwrap_err().exit_code(), 2);
}

#[test]
fn missing_directory_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = read_snapshot_dir(&dir.path().join("nope")).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}
