//! Batch prediction over many query points on a bounded worker pool.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use physreg_core::neighbors::NeighborSearch;
use physreg_core::predict::predict_with;
use physreg_core::types::Domain;
use physreg_core::{PdeModel, PredictConfig, Sample, Snapshot, SolveStatus, SpatioTemporalPoint};
use serde::Serialize;

use crate::error::{AppError, Result};

/// Per-node solver diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NodeOutcome {
    pub status: SolveStatus,
    pub degraded: bool,
    pub iterations: usize,
    pub outer_iterations: usize,
    pub kkt: [f64; 3],
    pub wall_ms: f64,
}

#[derive(Debug, Clone)]
pub struct GridPrediction {
    pub snapshot: Snapshot,
    pub outcomes: Vec<NodeOutcome>,
}

impl GridPrediction {
    pub fn degraded(&self) -> usize {
        self.outcomes.iter().filter(|o| o.degraded).count()
    }
}

/// `m x m` uniform lattice over the domain, `p1` varying fastest.
pub fn lattice(domain: &Domain, m: usize) -> Result<Vec<(f64, f64)>> {
    if m < 2 {
        return Err(AppError::Config(format!("grid resolution must be at least 2, got {m}")));
    }
    let step = |lo: f64, hi: f64, i: usize| if i == m - 1 { hi } else { lo + (hi - lo) * i as f64 / (m - 1) as f64 };
    Ok((0..m)
        .flat_map(|j| (0..m).map(move |i| (i, j)))
        .map(|(i, j)| (step(domain.p1_min, domain.p1_max, i), step(domain.p2_min, domain.p2_max, j)))
        .collect())
}

/// Predicts every point at time `t`. Node order is preserved and the values
/// do not depend on `workers`.
pub fn predict_points(
    points: &[(f64, f64)],
    t: f64,
    index: usize,
    data: &[Snapshot],
    pde: &dyn PdeModel,
    cfg: &PredictConfig,
    workers: usize,
) -> Result<GridPrediction> {
    cfg.validate()?;
    if data.iter().all(|s| s.is_empty()) {
        return Err(AppError::Config("no training samples".into()));
    }
    let search = NeighborSearch::new(data, &cfg.neighbors);
    let next = AtomicUsize::new(0);
    let run = || {
        let mut out = Vec::new();
        loop {
            let i = next.fetch_add(1, Ordering::Relaxed);
            if i >= points.len() {
                break;
            }
            let (p1, p2) = points[i];
            let start = Instant::now();
            let r = predict_with(&search, &SpatioTemporalPoint::new(p1, p2, t), pde, cfg);
            let wall_ms = start.elapsed().as_secs_f64() * 1e3;
            out.push((i, r.map(|r| {
                let rep = &r.report;
                let outcome = NodeOutcome {
                    status: rep.status,
                    degraded: r.degraded,
                    iterations: rep.iterations,
                    outer_iterations: rep.outer_iterations,
                    kkt: [rep.kkt_stationarity, rep.kkt_feasibility, rep.kkt_complementarity],
                    wall_ms,
                };
                (r.u_prime, outcome)
            })));
        }
        out
    };
    let workers = workers.clamp(1, points.len().max(1));
    let mut parts = if workers == 1 {
        run()
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = (0..workers).map(|_| s.spawn(run)).collect();
            handles.into_iter().flat_map(|h| h.join().expect("prediction worker panicked")).collect()
        })
    };
    parts.sort_by_key(|(i, _)| *i);
    let mut samples = Vec::with_capacity(points.len());
    let mut outcomes = Vec::with_capacity(points.len());
    for ((i, r), &(p1, p2)) in parts.into_iter().zip(points) {
        let (u, o) = r.map_err(|e| AppError::Config(format!("node {i}: {e}")))?;
        samples.push(Sample::new(p1, p2, t, u));
        outcomes.push(o);
    }
    Ok(GridPrediction { snapshot: Snapshot { index, t, samples }, outcomes })
}

/// Predicts the state on an `m x m` lattice over `domain` at time `t`.
pub fn predict_grid(
    domain: &Domain,
    m: usize,
    t: f64,
    data: &[Snapshot],
    pde: &dyn PdeModel,
    cfg: &PredictConfig,
    workers: usize,
) -> Result<GridPrediction> {
    let points = lattice(domain, m)?;
    predict_points(&points, t, 0, data, pde, cfg, workers)
}
