//! Interpolation and forecast experiments against a ground-truth run.

use std::path::{Path, PathBuf};

use physreg_core::metrics::median;
use physreg_core::sim::{sample_random, GroundTruth};
use physreg_core::{l2_relative_error, ErrorCurve, PdeModel, PredictConfig, Snapshot};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{AppError, Result};
use crate::grid::{predict_points, GridPrediction};
use crate::io::write_json;

/// Largest degraded fraction for which a run still counts.
pub const MAX_DEGRADED_FRACTION: f64 = 0.01;

/// Fewest queries behind a meaningful timing report.
pub const MIN_TIMED_QUERIES: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QueryTiming {
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    /// There is no fitting stage; kept as an explicit zero.
    pub pre_training_s: f64,
    pub per_query_ms: QueryTiming,
    pub k: usize,
    pub queries: usize,
    pub workers: usize,
}

impl TimingReport {
    pub fn from_samples(ms: &[f64], k: usize, workers: usize) -> Self {
        let mut sorted = ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let p95 = if n == 0 { f64::NAN } else { sorted[((0.95 * n as f64).ceil() as usize).clamp(1, n) - 1] };
        let mean = if n == 0 { f64::NAN } else { ms.iter().sum::<f64>() / n as f64 };
        Self {
            pre_training_s: 0.0,
            per_query_ms: QueryTiming { mean, median: median(sorted), p95 },
            k,
            queries: n,
            workers,
        }
    }

    pub fn is_representative(&self) -> bool {
        self.queries >= MIN_TIMED_QUERIES
    }
}

/// Node accounting shared by both experiments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct NodeCounts {
    pub scored: usize,
    pub degraded: usize,
    /// `optimal` reports whose KKT residuals exceed the solver tolerance.
    pub kkt_violations: usize,
}

impl NodeCounts {
    pub fn degraded_fraction(&self) -> f64 {
        if self.scored == 0 {
            0.0
        } else {
            self.degraded as f64 / self.scored as f64
        }
    }

    pub fn is_valid(&self) -> bool {
        self.degraded_fraction() <= MAX_DEGRADED_FRACTION && self.kkt_violations == 0
    }

    fn add(&mut self, p: &GridPrediction, tol: f64) {
        self.scored += p.outcomes.len();
        self.degraded += p.degraded();
        self.kkt_violations += p
            .outcomes
            .iter()
            .filter(|o| !o.degraded && o.kkt.iter().any(|v| *v > tol))
            .count();
    }
}

#[derive(Debug, Clone)]
pub struct BenchOptions {
    pub stride: usize,
    pub workers: usize,
    /// Snapshots to score; `None` scores `1..=K`.
    pub snapshots: Option<Vec<usize>>,
    /// Score `count` seeded random truth nodes per snapshot instead of the
    /// strided lattice.
    pub random_nodes: Option<RandomNodes>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RandomNodes {
    pub count: usize,
    pub seed: u64,
}

impl BenchOptions {
    pub fn from_config(cfg: &RunConfig) -> Self {
        Self { stride: cfg.score_stride, workers: cfg.worker_count(), snapshots: None, random_nodes: None }
    }
}

#[derive(Debug, Clone)]
pub struct InterpolationRun {
    pub curve: ErrorCurve,
    pub timing: TimingReport,
    pub counts: NodeCounts,
}

#[derive(Debug, Clone)]
pub struct ForecastRun {
    /// `(k_start, errors at k_start + 1, k_start + 2, ...)`.
    pub curves: Vec<(usize, ErrorCurve)>,
    pub timing: TimingReport,
    pub counts: NodeCounts,
}

fn score(
    truth: &GroundTruth,
    k_prime: usize,
    data: &[Snapshot],
    pde: &dyn PdeModel,
    cfg: &PredictConfig,
    opts: &BenchOptions,
) -> Result<(f64, GridPrediction)> {
    let target = match opts.random_nodes {
        Some(r) => sample_random(truth, r.count, r.seed)?.swap_remove(k_prime),
        None => truth.lattice(k_prime, opts.stride),
    };
    let points: Vec<(f64, f64)> = target.samples.iter().map(|s| (s.point.p1, s.point.p2)).collect();
    let pred = predict_points(&points, target.t, k_prime, data, pde, cfg, opts.workers)?;
    let err = l2_relative_error(&pred.snapshot, &target)?;
    Ok((err, pred))
}

fn check_index(truth: &GroundTruth, k: usize) -> Result<()> {
    if k >= truth.snapshots.len() {
        return Err(AppError::Config(format!("snapshot {k} is beyond the truth horizon {}", truth.snapshots.len() - 1)));
    }
    Ok(())
}

/// Every data snapshot is available; each scored truth snapshot is predicted
/// on the (strided) truth lattice.
pub fn run_interpolation(
    truth: &GroundTruth,
    data: &[Snapshot],
    pde: &dyn PdeModel,
    cfg: &PredictConfig,
    opts: &BenchOptions,
) -> Result<InterpolationRun> {
    let ks = opts.snapshots.clone().unwrap_or_else(|| (1..truth.snapshots.len()).collect());
    let mut curve = ErrorCurve::default();
    let mut counts = NodeCounts::default();
    let mut ms = Vec::new();
    for k in ks {
        check_index(truth, k)?;
        let (err, pred) = score(truth, k, data, pde, cfg, opts)?;
        counts.add(&pred, cfg.solver.qp.tol);
        ms.extend(pred.outcomes.iter().map(|o| o.wall_ms));
        curve.push(k, truth.snapshots[k].t, err);
    }
    Ok(InterpolationRun { curve, timing: TimingReport::from_samples(&ms, cfg.neighbors.k, opts.workers), counts })
}

/// For each `k_start`, only data snapshots `0..=k_start` are visible and
/// the following `horizon` truth snapshots are predicted (all remaining ones
/// for `None`).
pub fn run_forecast(
    truth: &GroundTruth,
    data: &[Snapshot],
    k_starts: &[usize],
    horizon: Option<usize>,
    pde: &dyn PdeModel,
    cfg: &PredictConfig,
    opts: &BenchOptions,
) -> Result<ForecastRun> {
    let last = truth.snapshots.len() - 1;
    let mut curves = Vec::new();
    let mut counts = NodeCounts::default();
    let mut ms = Vec::new();
    for &k0 in k_starts {
        if k0 >= last {
            return Err(AppError::Config(format!("k_start {k0} leaves nothing to forecast (last snapshot {last})")));
        }
        let visible: Vec<Snapshot> = data.iter().filter(|s| s.index <= k0).cloned().collect();
        if visible.is_empty() {
            return Err(AppError::Config(format!("no data snapshots up to {k0}")));
        }
        let end = horizon.map_or(last, |h| (k0 + h).min(last));
        let mut curve = ErrorCurve::default();
        for k in k0 + 1..=end {
            let (err, pred) = score(truth, k, &visible, pde, cfg, opts)?;
            counts.add(&pred, cfg.solver.qp.tol);
            ms.extend(pred.outcomes.iter().map(|o| o.wall_ms));
            curve.push(k, truth.snapshots[k].t, err);
        }
        curves.push((k0, curve));
    }
    Ok(ForecastRun { curves, timing: TimingReport::from_samples(&ms, cfg.neighbors.k, opts.workers), counts })
}

/// `k_prime,t,error` rows.
pub fn interp_csv(curve: &ErrorCurve) -> String {
    let mut s = String::from("k_prime,t,error\n");
    for p in &curve.points {
        s.push_str(&format!("{},{},{}\n", p.k_prime, p.t, p.error));
    }
    s
}

/// `k_prime,t,error,k_start` rows.
pub fn forecast_csv(curves: &[(usize, ErrorCurve)]) -> String {
    let mut s = String::from("k_prime,t,error,k_start\n");
    for (k0, c) in curves {
        for p in &c.points {
            s.push_str(&format!("{},{},{},{k0}\n", p.k_prime, p.t, p.error));
        }
    }
    s
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConfigRecord {
    pub config_hash: String,
    pub config: RunConfig,
    pub truth: String,
    pub data: String,
    pub mode: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub k_starts: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snapshots: Option<Vec<usize>>,
    /// Random scoring nodes per snapshot; the seed is the configured one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random_nodes: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimingRecord {
    #[serde(flatten)]
    pub timing: TimingReport,
    pub nodes: NodeCounts,
    pub valid: bool,
}

/// Run directory name: mode plus a digest of everything that determines the
/// numbers, so reruns land in the same place.
pub fn run_id(record: &ConfigRecord) -> String {
    let key = serde_json::json!({
        "config": record.config_hash,
        "truth": record.truth,
        "data": record.data,
        "mode": record.mode,
        "k_starts": record.k_starts,
        "horizon": record.horizon,
        "snapshots": record.snapshots,
        "random_nodes": record.random_nodes,
    });
    let digest = crate::io::sha256_hex(key.to_string().as_bytes());
    format!("{}-{}", record.mode, &digest[..12])
}

/// Writes `config.json`, the error CSV(s) and `timing.json` into
/// `root/<run-id>/` and returns that directory.
pub fn write_results(
    root: &Path,
    record: &ConfigRecord,
    interp: Option<&ErrorCurve>,
    forecast: Option<&[(usize, ErrorCurve)]>,
    timing: &TimingReport,
    counts: NodeCounts,
) -> Result<PathBuf> {
    let dir = root.join(run_id(record));
    std::fs::create_dir_all(&dir).map_err(AppError::io(&dir))?;
    write_json(&dir.join("config.json"), record)?;
    if let Some(c) = interp {
        let p = dir.join("errors_interp.csv");
        std::fs::write(&p, interp_csv(c)).map_err(AppError::io(&p))?;
    }
    if let Some(c) = forecast {
        let p = dir.join("errors_forecast.csv");
        std::fs::write(&p, forecast_csv(c)).map_err(AppError::io(&p))?;
    }
    let rec = TimingRecord { timing: timing.clone(), nodes: counts, valid: counts.is_valid() };
    write_json(&dir.join("timing.json"), &rec)?;
    Ok(dir)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn timing_statistics() {
        let ms: Vec<f64> = (1..=100).map(|v| v as f64).collect();
        let t = TimingReport::from_samples(&ms, 10, 1);
        assert_eq!(t.pre_training_s, 0.0);
        assert_eq!(t.per_query_ms.mean, 50.5);
        assert_eq!(t.per_query_ms.median, 50.5);
        assert_eq!(t.per_query_ms.p95, 95.0);
        assert!(t.is_representative());
        assert!(!TimingReport::from_samples(&ms[..99], 10, 1).is_representative());
    }

    #[test]
    fn validity_threshold() {
        let ok = NodeCounts { scored: 1000, degraded: 10, kkt_violations: 0 };
        let bad = NodeCounts { scored: 1000, degraded: 11, kkt_violations: 0 };
        assert!(ok.is_valid());
        assert!(!bad.is_valid());
        assert!(!NodeCounts { kkt_violations: 1, ..ok }.is_valid());
    }

    #[test]
    fn csv_layout() {
        let mut c = ErrorCurve::default();
        c.push(1, 0.1, 0.25);
        c.push(2, 0.2, 0.5);
        assert_eq!(interp_csv(&c), "k_prime,t,error\n1,0.1,0.25\n2,0.2,0.5\n");
        assert_eq!(forecast_csv(&[(3, c)]), "k_prime,t,error,k_start\n1,0.1,0.25,3\n2,0.2,0.5,3\n");
    }
}
