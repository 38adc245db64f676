//! Finite-difference reference solver for the reaction-diffusion-advection
//! benchmark and the GRID / RAND data sets drawn from it.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::physics::RdsParams;
use crate::types::{Domain, Sample, Snapshot};
use crate::{Error, Result};

/// `amplitude * exp(-|x - center|^2 / (2 sigma^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GaussianPeak {
    pub center: [f64; 2],
    pub amplitude: f64,
    pub sigma: f64,
}

impl GaussianPeak {
    pub fn eval(&self, p1: f64, p2: f64) -> f64 {
        let d1 = p1 - self.center[0];
        let d2 = p2 - self.center[1];
        self.amplitude * libm::exp(-(d1 * d1 + d2 * d2) / (2.0 * self.sigma * self.sigma))
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SimConfig {
    /// Nodes per axis, boundaries included.
    pub grid_n: usize,
    pub domain: Domain,
    pub dt_sim: f64,
    pub snapshot_dt: f64,
    /// Last snapshot index; `horizon + 1` snapshots are produced.
    pub horizon: usize,
    pub ic: Vec<GaussianPeak>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grid_n: 120,
            domain: Domain::default(),
            dt_sim: 0.01,
            snapshot_dt: 0.1,
            horizon: 25,
            ic: three_peaks(),
        }
    }
}

pub fn three_peaks() -> Vec<GaussianPeak> {
    vec![
        GaussianPeak { center: [2.5, 2.5], amplitude: 40.0, sigma: 0.6 },
        GaussianPeak { center: [7.0, 3.5], amplitude: 30.0, sigma: 0.6 },
        GaussianPeak { center: [4.0, 7.5], amplitude: 35.0, sigma: 0.6 },
    ]
}

impl SimConfig {
    pub fn spacing(&self) -> (f64, f64) {
        let d = (self.grid_n - 1) as f64;
        ((self.domain.p1_max - self.domain.p1_min) / d, (self.domain.p2_max - self.domain.p2_min) / d)
    }

    /// Largest stable step `h^2 / (4 nu + h |w|)` with `h` the finer spacing.
    pub fn stability_bound(&self, params: &RdsParams) -> f64 {
        let (h1, h2) = self.spacing();
        let h = h1.min(h2);
        let wn = libm::sqrt(params.w[0] * params.w[0] + params.w[1] * params.w[1]);
        let den = 4.0 * params.nu + h * wn;
        if den > 0.0 {
            h * h / den
        } else {
            f64::INFINITY
        }
    }

    pub fn steps_per_snapshot(&self) -> Result<usize> {
        let r = self.snapshot_dt / self.dt_sim;
        let steps = libm::round(r);
        if !(steps >= 1.0) || libm::fabs(r - steps) > 1e-9 * r {
            return Err(Error::InvalidConfig(format!(
                "snapshot_dt {} is not a multiple of dt_sim {}",
                self.snapshot_dt, self.dt_sim
            )));
        }
        Ok(steps as usize)
    }

    pub fn validate(&self, params: &RdsParams) -> Result<()> {
        params.validate()?;
        self.domain.validate()?;
        if self.grid_n < 3 {
            return Err(Error::InvalidConfig(format!("grid_n must be at least 3, got {}", self.grid_n)));
        }
        if !(self.dt_sim > 0.0 && self.snapshot_dt > 0.0) {
            return Err(Error::InvalidConfig("time steps must be positive".into()));
        }
        self.steps_per_snapshot()?;
        let bound = self.stability_bound(params);
        if self.dt_sim > bound {
            return Err(Error::Unstable { dt: self.dt_sim, bound });
        }
        Ok(())
    }

    pub fn node(&self, i: usize, j: usize) -> (f64, f64) {
        let (h1, h2) = self.spacing();
        let p1 = if i == self.grid_n - 1 { self.domain.p1_max } else { self.domain.p1_min + i as f64 * h1 };
        let p2 = if j == self.grid_n - 1 { self.domain.p2_max } else { self.domain.p2_min + j as f64 * h2 };
        (p1, p2)
    }

    pub fn initial_state(&self) -> Vec<f64> {
        let n = self.grid_n;
        let mut u = vec![0.0; n * n];
        for j in 0..n {
            for i in 0..n {
                let (p1, p2) = self.node(i, j);
                u[j * n + i] = self.ic.iter().map(|g| g.eval(p1, p2)).sum();
            }
        }
        u
    }
}

/// Full-grid snapshots at `t_k = k * snapshot_dt`; samples are stored with
/// `p1` varying fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub grid_n: usize,
    pub domain: Domain,
    pub snapshots: Vec<Snapshot>,
}

impl GroundTruth {
    /// Wraps already computed snapshots (for example read back from disk).
    pub fn from_snapshots(grid_n: usize, domain: Domain, snapshots: Vec<Snapshot>) -> Result<Self> {
        if snapshots.iter().any(|s| s.len() != grid_n * grid_n) {
            return Err(Error::Dimension("snapshot size does not match grid_n^2"));
        }
        Ok(Self { grid_n, domain, snapshots })
    }

    pub fn node_index(&self, i: usize, j: usize) -> usize {
        j * self.grid_n + i
    }

    /// Sub-lattice taking every `stride`-th node per axis (last node kept).
    pub fn lattice(&self, k: usize, stride: usize) -> Snapshot {
        let idx = strided(self.grid_n, stride.max(1));
        let s = &self.snapshots[k];
        let samples = idx.iter().flat_map(|&j| idx.iter().map(move |&i| s.samples[j * self.grid_n + i])).collect();
        Snapshot { index: s.index, t: s.t, samples }
    }
}

fn strided(n: usize, stride: usize) -> Vec<usize> {
    let mut v: Vec<usize> = (0..n).step_by(stride).collect();
    if *v.last().unwrap() != n - 1 {
        v.push(n - 1);
    }
    v
}

struct Stepper<'a> {
    n: usize,
    params: &'a RdsParams,
    inv_h1sq: f64,
    inv_h2sq: f64,
    inv_2h1: f64,
    inv_2h2: f64,
}

impl Stepper<'_> {
    fn rhs(&self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let p = self.params;
        for j in 0..n {
            // ghost reflection: u[-1] = u[1], u[n] = u[n-2]
            let jm = if j == 0 { 1 } else { j - 1 };
            let jp = if j == n - 1 { n - 2 } else { j + 1 };
            for i in 0..n {
                let im = if i == 0 { 1 } else { i - 1 };
                let ip = if i == n - 1 { n - 2 } else { i + 1 };
                let c = u[j * n + i];
                let (e, w) = (u[j * n + ip], u[j * n + im]);
                let (no, so) = (u[jp * n + i], u[jm * n + i]);
                let lap = (e - 2.0 * c + w) * self.inv_h1sq + (no - 2.0 * c + so) * self.inv_h2sq;
                let g1 = (e - w) * self.inv_2h1;
                let g2 = (no - so) * self.inv_2h2;
                out[j * n + i] = p.nu * lap + p.alpha * c - p.beta * c * c + p.w[0] * g1 + p.w[1] * g2;
            }
        }
    }
}

/// Explicit RK4 with second-order central differences and no-flux
/// boundaries. Aborts with [`Error::BlowUp`] on a non-finite state.
pub fn simulate(cfg: &SimConfig, params: &RdsParams) -> Result<GroundTruth> {
    cfg.validate(params)?;
    let n = cfg.grid_n;
    let (h1, h2) = cfg.spacing();
    let st = Stepper {
        n,
        params,
        inv_h1sq: 1.0 / (h1 * h1),
        inv_h2sq: 1.0 / (h2 * h2),
        inv_2h1: 0.5 / h1,
        inv_2h2: 0.5 / h2,
    };
    let steps = cfg.steps_per_snapshot()?;
    let dt = cfg.dt_sim;
    let nodes: Vec<(f64, f64)> = (0..n).flat_map(|j| (0..n).map(move |i| (i, j))).map(|(i, j)| cfg.node(i, j)).collect();
    let record = |k: usize, u: &[f64]| {
        let t = k as f64 * cfg.snapshot_dt;
        let samples = nodes.iter().zip(u).map(|(&(p1, p2), &v)| Sample::new(p1, p2, t, v)).collect();
        Snapshot { index: k, t, samples }
    };

    let mut u = cfg.initial_state();
    let len = u.len();
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len], vec![0.0; len]);
    let mut snapshots = Vec::with_capacity(cfg.horizon + 1);
    snapshots.push(record(0, &u));
    let mut step = 0usize;
    for k in 1..=cfg.horizon {
        for _ in 0..steps {
            st.rhs(&u, &mut k1);
            for q in 0..len {
                tmp[q] = u[q] + 0.5 * dt * k1[q];
            }
            st.rhs(&tmp, &mut k2);
            for q in 0..len {
                tmp[q] = u[q] + 0.5 * dt * k2[q];
            }
            st.rhs(&tmp, &mut k3);
            for q in 0..len {
                tmp[q] = u[q] + dt * k3[q];
            }
            st.rhs(&tmp, &mut k4);
            let mut finite = true;
            for q in 0..len {
                u[q] += dt / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
                finite &= u[q].is_finite() && u[q].abs() < 1e12;
            }
            step += 1;
            if !finite {
                return Err(Error::BlowUp { step });
            }
        }
        snapshots.push(record(k, &u));
    }
    Ok(GroundTruth { grid_n: n, domain: cfg.domain, snapshots })
}

/// Grid indices `round(i (n - 1) / (m - 1))`; `true` when they are evenly spaced.
pub fn grid_indices(n: usize, m: usize) -> (Vec<usize>, bool) {
    let idx = (0..m).map(|i| libm::round((i * (n - 1)) as f64 / (m - 1) as f64) as usize).collect();
    (idx, (n - 1) % (m - 1) == 0)
}

/// `m x m` node subset of every snapshot. The flag is `false` when `m` does
/// not divide the truth lattice evenly and nearest nodes were used.
pub fn sample_grid(truth: &GroundTruth, m: usize) -> Result<(Vec<Snapshot>, bool)> {
    let n = truth.grid_n;
    if m > n {
        return Err(Error::GridTooFine { requested: m, available: n });
    }
    if m < 2 {
        return Err(Error::InvalidConfig(format!("grid resolution must be at least 2, got {m}")));
    }
    let (idx, exact) = grid_indices(n, m);
    let snaps = truth
        .snapshots
        .iter()
        .map(|s| {
            let samples = idx.iter().flat_map(|&j| idx.iter().map(move |&i| s.samples[j * n + i])).collect();
            Snapshot { index: s.index, t: s.t, samples }
        })
        .collect();
    Ok((snaps, exact))
}

/// `count` uniform draws per snapshot, each snapped to the nearest truth
/// node. Draws landing on an already chosen node are redrawn so every
/// snapshot holds distinct points.
pub fn sample_random(truth: &GroundTruth, count: usize, seed: u64) -> Result<Vec<Snapshot>> {
    let n = truth.grid_n;
    if count == 0 || count > n * n {
        return Err(Error::InvalidConfig(format!("sample count must be in 1..={}, got {count}", n * n)));
    }
    let d = truth.domain;
    let (h1, h2) = ((d.p1_max - d.p1_min) / (n - 1) as f64, (d.p2_max - d.p2_min) / (n - 1) as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut taken = vec![false; n * n];
    let mut out = Vec::with_capacity(truth.snapshots.len());
    for s in &truth.snapshots {
        taken.iter_mut().for_each(|t| *t = false);
        let mut samples = Vec::with_capacity(count);
        while samples.len() < count {
            let p1: f64 = rng.gen_range(d.p1_min..=d.p1_max);
            let p2: f64 = rng.gen_range(d.p2_min..=d.p2_max);
            let i = (libm::round((p1 - d.p1_min) / h1) as usize).min(n - 1);
            let j = (libm::round((p2 - d.p2_min) / h2) as usize).min(n - 1);
            let q = j * n + i;
            if !taken[q] {
                taken[q] = true;
                samples.push(s.samples[q]);
            }
        }
        out.push(Snapshot { index: s.index, t: s.t, samples });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(n: usize, horizon: usize) -> SimConfig {
        SimConfig { grid_n: n, horizon, ..Default::default() }
    }

    #[test]
    fn rejects_unstable_step() {
        let cfg = SimConfig { dt_sim: 0.1, snapshot_dt: 0.1, ..Default::default() };
        assert!(matches!(cfg.validate(&RdsParams::default()), Err(Error::Unstable { .. })));
        let cfg = SimConfig { dt_sim: 0.03, ..Default::default() };
        assert!(matches!(cfg.validate(&RdsParams::default()), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn snapshot_times() {
        let gt = simulate(&small(21, 4), &RdsParams::default()).unwrap();
        assert_eq!(gt.snapshots.len(), 5);
        for (k, s) in gt.snapshots.iter().enumerate() {
            assert_eq!(s.t, k as f64 * 0.1);
            assert!(s.samples.iter().all(|x| x.point.t == s.t));
        }
    }

    #[test]
    fn grid_subset_is_exact() {
        let gt = simulate(&small(21, 1), &RdsParams::default()).unwrap();
        let (g, exact) = sample_grid(&gt, 11).unwrap();
        assert!(exact);
        assert_eq!(g[1].len(), 121);
        for s in &g[1].samples {
            let i = libm::round(s.point.p1 / 0.5) as usize;
            let j = libm::round(s.point.p2 / 0.5) as usize;
            assert_eq!(s.u.to_bits(), gt.snapshots[1].samples[gt.node_index(i, j)].u.to_bits());
        }
        let (id, _) = sample_grid(&gt, 21).unwrap();
        assert_eq!(id[0], gt.snapshots[0]);
        assert!(!sample_grid(&gt, 10).unwrap().1);
        assert_eq!(sample_grid(&gt, 22).unwrap_err(), Error::GridTooFine { requested: 22, available: 21 });
    }

    #[test]
    fn random_sets_are_seeded_and_distinct() {
        let gt = simulate(&small(21, 2), &RdsParams::default()).unwrap();
        let a = sample_random(&gt, 100, 7).unwrap();
        assert_eq!(a, sample_random(&gt, 100, 7).unwrap());
        assert_ne!(a, sample_random(&gt, 100, 8).unwrap());
        for s in &a {
            let mut pts: Vec<_> = s.samples.iter().map(|x| (x.point.p1.to_bits(), x.point.p2.to_bits())).collect();
            pts.sort_unstable();
            pts.dedup();
            assert_eq!(pts.len(), 100);
        }
        assert_ne!(a[0].samples[0].point.p1, a[1].samples[0].point.p1);
    }
}
