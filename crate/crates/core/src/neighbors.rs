//! Local sample selection: the `k` nearest samples under a scaled Euclidean
//! spatio-temporal metric.
//!
//! Ties are broken by `(t, p1, p2, insertion index)` so the selected set does
//! not depend on the order in which samples are supplied.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use crate::types::{AxisScaling, Sample, Snapshot, SpatioTemporalPoint};
use crate::{Error, Result};

/// Datasets larger than this use [`BucketIndex`].
pub const LINEAR_SCAN_LIMIT: usize = 100_000;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NeighborConfig {
    pub k: usize,
    /// Metric scaling. `None` derives it from the data: unit spatial scales
    /// and a time scale equating one snapshot interval with the typical
    /// spatial sample spacing.
    pub metric: Option<AxisScaling>,
}

impl Default for NeighborConfig {
    fn default() -> Self {
        Self { k: 10, metric: None }
    }
}

impl NeighborConfig {
    pub fn with_k(k: usize) -> Self {
        Self { k, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 4 {
            return Err(Error::InvalidConfig(format!("neighbour count k = {} must be at least 4", self.k)));
        }
        if let Some(m) = &self.metric {
            m.validate()?;
        }
        Ok(())
    }

    pub fn resolve_metric(&self, data: &[Snapshot]) -> AxisScaling {
        self.metric.unwrap_or_else(|| default_metric(data))
    }
}

/// Unit space scales and `st = spacing / dt`, where `spacing` is the mean
/// nearest-grid spacing `sqrt(area / samples_per_snapshot)` and `dt` is the
/// median interval between consecutive snapshots.
pub fn default_metric(data: &[Snapshot]) -> AxisScaling {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut count = 0usize;
    let mut populated = 0usize;
    for snap in data {
        if !snap.is_empty() {
            populated += 1;
        }
        for s in &snap.samples {
            lo[0] = lo[0].min(s.point.p1);
            lo[1] = lo[1].min(s.point.p2);
            hi[0] = hi[0].max(s.point.p1);
            hi[1] = hi[1].max(s.point.p2);
            count += 1;
        }
    }
    let mut times: Vec<f64> = data.iter().filter(|s| !s.is_empty()).map(|s| s.t).collect();
    times.sort_by(f64::total_cmp);
    times.dedup();
    if count == 0 || times.len() < 2 {
        return AxisScaling::IDENTITY;
    }
    let area = (hi[0] - lo[0]).max(0.0) * (hi[1] - lo[1]).max(0.0);
    let per_snapshot = count as f64 / populated as f64;
    let spacing = libm::sqrt(area / per_snapshot);
    let mut gaps: Vec<f64> = times.windows(2).map(|w| w[1] - w[0]).collect();
    gaps.sort_by(f64::total_cmp);
    let dt = gaps[gaps.len() / 2];
    if spacing > 0.0 && dt > 0.0 && spacing.is_finite() {
        AxisScaling { s1: 1.0, s2: 1.0, st: spacing / dt }
    } else {
        AxisScaling::IDENTITY
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct NeighborSelection {
    pub samples: Vec<Sample>,
    /// Flat insertion index (snapshot order, then sample order).
    pub ids: Vec<usize>,
    /// Scaled distances to the query.
    pub distances: Vec<f64>,
    /// Fewer than `k` samples were available.
    pub undersized: bool,
}

#[derive(Clone, Copy)]
struct Candidate {
    d2: f64,
    id: usize,
    sample: Sample,
}

fn candidate_cmp(a: &Candidate, b: &Candidate) -> Ordering {
    a.d2.total_cmp(&b.d2)
        .then_with(|| a.sample.point.tie_key_cmp(&b.sample.point))
        .then(a.id.cmp(&b.id))
}

/// Bounded sorted buffer holding the best `k` candidates.
struct TopK {
    k: usize,
    items: Vec<Candidate>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self { k, items: Vec::with_capacity(k + 1) }
    }

    fn full(&self) -> bool {
        self.items.len() >= self.k
    }

    fn worst_d2(&self) -> f64 {
        self.items.last().map_or(f64::INFINITY, |c| c.d2)
    }

    fn offer(&mut self, c: Candidate) {
        if self.full() && candidate_cmp(&c, self.items.last().unwrap()) != Ordering::Less {
            return;
        }
        let pos = self.items.partition_point(|x| candidate_cmp(x, &c) == Ordering::Less);
        self.items.insert(pos, c);
        self.items.truncate(self.k);
    }

    fn finish(self, requested: usize) -> NeighborSelection {
        let undersized = self.items.len() < requested;
        let mut out = NeighborSelection { undersized, ..Default::default() };
        for c in self.items {
            out.samples.push(c.sample);
            out.ids.push(c.id);
            out.distances.push(libm::sqrt(c.d2));
        }
        out
    }
}

fn scaled_d2(q: &[f64; 3], p: &SpatioTemporalPoint, m: &AxisScaling) -> f64 {
    let a = p.p1 * m.s1 - q[0];
    let b = p.p2 * m.s2 - q[1];
    let c = p.t * m.st - q[2];
    a * a + b * b + c * c
}

fn linear_scan(query: &SpatioTemporalPoint, data: &[Snapshot], k: usize, metric: &AxisScaling) -> NeighborSelection {
    let q = metric.apply(query);
    let mut top = TopK::new(k);
    let mut id = 0;
    for snap in data {
        for s in &snap.samples {
            let d2 = scaled_d2(&q, &s.point, metric);
            if !top.full() || d2 <= top.worst_d2() {
                top.offer(Candidate { d2, id, sample: *s });
            }
            id += 1;
        }
    }
    top.finish(k)
}

/// The `cfg.k` nearest samples, sorted by distance then tie-break key.
///
/// Scans linearly up to [`LINEAR_SCAN_LIMIT`] samples and builds a
/// [`BucketIndex`] above that. Callers issuing many queries against large
/// data should build a [`NeighborSearch`] once instead.
pub fn select_neighbors(query: &SpatioTemporalPoint, data: &[Snapshot], cfg: &NeighborConfig) -> NeighborSelection {
    NeighborSearch::new(data, cfg).select(query)
}

/// Reusable neighbour search over one dataset.
pub enum NeighborSearch<'a> {
    Linear { data: &'a [Snapshot], k: usize, metric: AxisScaling },
    Bucketed(BucketIndex),
}

impl<'a> NeighborSearch<'a> {
    pub fn new(data: &'a [Snapshot], cfg: &NeighborConfig) -> Self {
        let metric = cfg.resolve_metric(data);
        let total: usize = data.iter().map(Snapshot::len).sum();
        if total > LINEAR_SCAN_LIMIT {
            NeighborSearch::Bucketed(BucketIndex::new(data, cfg.k, metric))
        } else {
            NeighborSearch::Linear { data, k: cfg.k, metric }
        }
    }

    pub fn metric(&self) -> AxisScaling {
        match self {
            NeighborSearch::Linear { metric, .. } => *metric,
            NeighborSearch::Bucketed(ix) => ix.metric,
        }
    }

    pub fn select(&self, query: &SpatioTemporalPoint) -> NeighborSelection {
        match self {
            NeighborSearch::Linear { data, k, metric } => linear_scan(query, data, *k, metric),
            NeighborSearch::Bucketed(ix) => ix.select(query),
        }
    }
}

/// Uniform grid of buckets over the scaled coordinates.
pub struct BucketIndex {
    k: usize,
    metric: AxisScaling,
    origin: [f64; 3],
    cell: f64,
    dims: [usize; 3],
    /// Cell `c` owns `entries[starts[c]..starts[c + 1]]`.
    starts: Vec<usize>,
    entries: Vec<Candidate>,
}

impl BucketIndex {
    pub fn new(data: &[Snapshot], k: usize, metric: AxisScaling) -> Self {
        let mut all = Vec::new();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        let mut id = 0;
        for snap in data {
            for s in &snap.samples {
                let q = metric.apply(&s.point);
                for a in 0..3 {
                    lo[a] = lo[a].min(q[a]);
                    hi[a] = hi[a].max(q[a]);
                }
                all.push(Candidate { d2: 0.0, id, sample: *s });
                id += 1;
            }
        }
        if all.is_empty() {
            return Self { k, metric, origin: [0.0; 3], cell: 1.0, dims: [1; 3], starts: vec![0, 0], entries: all };
        }
        // aim for a handful of samples per cell
        let extent = [hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]];
        let volume: f64 = extent.iter().map(|e| e.max(1e-12)).product();
        let target = (all.len() as f64 / 4.0).max(1.0);
        let mut cell = libm::cbrt(volume / target);
        let max_extent = extent.iter().cloned().fold(0.0, f64::max);
        if !(cell.is_finite() && cell > 0.0) {
            cell = max_extent.max(1.0);
        }
        // guard against flat extents blowing up the cell count
        cell = cell.max(max_extent / 256.0);
        let dims = extent.map(|e| ((e / cell) as usize + 1).max(1));
        let ncell = dims[0] * dims[1] * dims[2];
        let cell_of = |c: &Candidate| {
            let q = metric.apply(&c.sample.point);
            let mut idx = [0usize; 3];
            for a in 0..3 {
                idx[a] = (((q[a] - lo[a]) / cell) as usize).min(dims[a] - 1);
            }
            (idx[2] * dims[1] + idx[1]) * dims[0] + idx[0]
        };
        let mut counts = vec![0usize; ncell + 1];
        for c in &all {
            counts[cell_of(c) + 1] += 1;
        }
        for i in 0..ncell {
            counts[i + 1] += counts[i];
        }
        let starts = counts.clone();
        let mut fill = counts;
        let mut entries = all.clone();
        for c in all {
            let slot = cell_of(&c);
            entries[fill[slot]] = c;
            fill[slot] += 1;
        }
        Self { k, metric, origin: lo, cell, dims, starts, entries }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn select(&self, query: &SpatioTemporalPoint) -> NeighborSelection {
        let q = self.metric.apply(query);
        let mut top = TopK::new(self.k);
        // virtual cell of the query, possibly outside the grid
        let qc: [i64; 3] = core::array::from_fn(|a| libm::floor((q[a] - self.origin[a]) / self.cell) as i64);
        let max_shell = (0..3)
            .map(|a| (qc[a]).abs().max((qc[a] - self.dims[a] as i64 + 1).abs()))
            .max()
            .unwrap_or(0);
        for shell in 0..=max_shell {
            self.visit_shell(&qc, shell, &q, &mut top);
            if top.full() {
                let reach = shell as f64 * self.cell;
                if top.worst_d2() < reach * reach {
                    break;
                }
            }
        }
        top.finish(self.k)
    }

    fn visit_shell(&self, qc: &[i64; 3], shell: i64, q: &[f64; 3], top: &mut TopK) {
        let lo: [i64; 3] = core::array::from_fn(|a| (qc[a] - shell).max(0));
        let hi: [i64; 3] = core::array::from_fn(|a| (qc[a] + shell).min(self.dims[a] as i64 - 1));
        if (0..3).any(|a| lo[a] > hi[a]) {
            return;
        }
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    let cheb = (x - qc[0]).abs().max((y - qc[1]).abs()).max((z - qc[2]).abs());
                    if cheb != shell {
                        continue;
                    }
                    let c = ((z as usize * self.dims[1]) + y as usize) * self.dims[0] + x as usize;
                    for e in &self.entries[self.starts[c]..self.starts[c + 1]] {
                        let d2 = scaled_d2(q, &e.sample.point, &self.metric);
                        if !top.full() || d2 <= top.worst_d2() {
                            top.offer(Candidate { d2, ..*e });
                        }
                    }
                }
            }
        }
    }
}
