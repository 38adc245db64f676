//! Domain vocabulary shared by every module.

use alloc::format;
use alloc::vec::Vec;
use core::ops::Range;

use crate::{Error, Result};

/// A location `(p1, p2, t)` in the spatio-temporal domain.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpatioTemporalPoint {
    pub p1: f64,
    pub p2: f64,
    pub t: f64,
}

impl SpatioTemporalPoint {
    pub const fn new(p1: f64, p2: f64, t: f64) -> Self {
        Self { p1, p2, t }
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.p1, self.p2, self.t]
    }

    pub fn is_finite(&self) -> bool {
        self.p1.is_finite() && self.p2.is_finite() && self.t.is_finite()
    }

    /// Lexicographic `(t, p1, p2)` ordering used to break distance ties.
    pub fn tie_key_cmp(&self, other: &Self) -> core::cmp::Ordering {
        self.t
            .total_cmp(&other.t)
            .then(self.p1.total_cmp(&other.p1))
            .then(self.p2.total_cmp(&other.p2))
    }
}

/// Closed axis-aligned spatial rectangle `[p1_min, p1_max] x [p2_min, p2_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Domain {
    pub p1_min: f64,
    pub p1_max: f64,
    pub p2_min: f64,
    pub p2_max: f64,
}

impl Default for Domain {
    fn default() -> Self {
        Self { p1_min: 0.0, p1_max: 10.0, p2_min: 0.0, p2_max: 10.0 }
    }
}

impl Domain {
    pub fn validate(&self) -> Result<()> {
        if !(self.p1_max > self.p1_min && self.p2_max > self.p2_min) {
            return Err(Error::InvalidConfig(format!("degenerate domain {self:?}")));
        }
        Ok(())
    }

    /// Spatial containment plus `t >= 0`.
    pub fn contains(&self, x: &SpatioTemporalPoint) -> bool {
        x.t >= 0.0
            && x.p1 >= self.p1_min
            && x.p1 <= self.p1_max
            && x.p2 >= self.p2_min
            && x.p2 <= self.p2_max
    }
}

/// A point paired with its exact (noise-free) state value.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Sample {
    pub point: SpatioTemporalPoint,
    pub u: f64,
}

impl Sample {
    pub const fn new(p1: f64, p2: f64, t: f64, u: f64) -> Self {
        Self { point: SpatioTemporalPoint::new(p1, p2, t), u }
    }
}

/// Samples that all share the snapshot time `t`.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Snapshot {
    pub index: usize,
    pub t: f64,
    pub samples: Vec<Sample>,
}

impl Snapshot {
    /// Fails if any sample has a different time or a non-finite value.
    pub fn new(index: usize, t: f64, samples: Vec<Sample>) -> Result<Self> {
        if let Some(bad) = samples.iter().position(|s| s.point.t != t) {
            return Err(Error::InvalidConfig(format!(
                "sample {bad} of snapshot {index} has t = {} instead of {t}",
                samples[bad].point.t
            )));
        }
        if let Some(bad) = samples.iter().position(|s| !s.u.is_finite() || !s.point.is_finite()) {
            return Err(Error::InvalidConfig(format!("sample {bad} of snapshot {index} is not finite")));
        }
        Ok(Self { index, t, samples })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Positive per-axis factors applied to coordinates before any distance or
/// constraint coefficient is computed.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AxisScaling {
    pub s1: f64,
    pub s2: f64,
    pub st: f64,
}

impl Default for AxisScaling {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl AxisScaling {
    pub const IDENTITY: Self = Self { s1: 1.0, s2: 1.0, st: 1.0 };

    pub fn new(s1: f64, s2: f64, st: f64) -> Result<Self> {
        let s = Self { s1, s2, st };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if ok(self.s1) && ok(self.s2) && ok(self.st) {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("axis scaling factors must be positive: {self:?}")))
        }
    }

    pub fn factors(&self) -> [f64; 3] {
        [self.s1, self.s2, self.st]
    }

    pub fn apply(&self, x: &SpatioTemporalPoint) -> [f64; 3] {
        [x.p1 * self.s1, x.p2 * self.s2, x.t * self.st]
    }

    pub fn unapply(&self, q: [f64; 3]) -> SpatioTemporalPoint {
        SpatioTemporalPoint::new(q[0] / self.s1, q[1] / self.s2, q[2] / self.st)
    }
}

/// Scaled displacement `xi = to - from` with its norm and the half-vector of
/// `xi xi^T` (off-diagonal entries doubled) so that `lambda . h = xi^T H xi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Displacement {
    pub xi: [f64; 3],
    pub r: f64,
    pub lambda: [f64; 6],
}

impl Displacement {
    pub fn from_xi(xi: [f64; 3]) -> Self {
        let [a, b, c] = xi;
        Self {
            xi,
            r: libm::sqrt(a * a + b * b + c * c),
            lambda: [a * a, b * b, c * c, 2.0 * a * b, 2.0 * a * c, 2.0 * b * c],
        }
    }

    pub fn negated(&self) -> Self {
        Self { xi: [-self.xi[0], -self.xi[1], -self.xi[2]], r: self.r, lambda: self.lambda }
    }
}

pub fn displacement(from: &SpatioTemporalPoint, to: &SpatioTemporalPoint, scaling: &AxisScaling) -> Displacement {
    let a = scaling.apply(from);
    let b = scaling.apply(to);
    Displacement::from_xi([b[0] - a[0], b[1] - a[1], b[2] - a[2]])
}

/// Number of entries in one point's block of the decision vector.
pub const KAPPA_LEN: usize = 11;
/// Gradient (3) plus Hessian half-vector (6).
pub const OMEGA_LEN: usize = 9;
pub const G_OFFSET: usize = 0;
pub const H_OFFSET: usize = 3;
pub const EPS_G_OFFSET: usize = 9;
pub const EPS_Q_OFFSET: usize = 10;

/// Gradient, Hessian half-vector `(h11, h22, h33, h12, h13, h23)` and the two
/// non-negative remainder slacks of one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FieldVars {
    pub g: [f64; 3],
    pub h: [f64; 6],
    pub eps_g: f64,
    pub eps_q: f64,
}

impl FieldVars {
    /// Reads one `KAPPA_LEN` block.
    pub fn from_kappa(kappa: &[f64]) -> Self {
        assert_eq!(kappa.len(), KAPPA_LEN, "kappa block has the wrong length");
        let mut g = [0.0; 3];
        let mut h = [0.0; 6];
        g.copy_from_slice(&kappa[G_OFFSET..H_OFFSET]);
        h.copy_from_slice(&kappa[H_OFFSET..EPS_G_OFFSET]);
        Self { g, h, eps_g: kappa[EPS_G_OFFSET], eps_q: kappa[EPS_Q_OFFSET] }
    }

    pub fn write_kappa(&self, kappa: &mut [f64]) {
        kappa[G_OFFSET..H_OFFSET].copy_from_slice(&self.g);
        kappa[H_OFFSET..EPS_G_OFFSET].copy_from_slice(&self.h);
        kappa[EPS_G_OFFSET] = self.eps_g;
        kappa[EPS_Q_OFFSET] = self.eps_q;
    }

    pub fn omega(&self) -> [f64; OMEGA_LEN] {
        let mut w = [0.0; OMEGA_LEN];
        w[..3].copy_from_slice(&self.g);
        w[3..].copy_from_slice(&self.h);
        w
    }

    /// Converts derivatives taken in scaled coordinates back to physical ones.
    pub fn unscaled(&self, scaling: &AxisScaling) -> Self {
        let s = scaling.factors();
        let mut out = *self;
        for a in 0..3 {
            out.g[a] = self.g[a] * s[a];
        }
        for (slot, (a, b)) in HALF_VEC_PAIRS.iter().enumerate() {
            out.h[slot] = self.h[slot] * s[*a] * s[*b];
        }
        out
    }

    pub fn hessian(&self) -> [[f64; 3]; 3] {
        hessian_from_half(&self.h)
    }
}

/// Index pairs `(a, b)` addressed by each half-vector slot.
pub const HALF_VEC_PAIRS: [(usize, usize); 6] = [(0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2)];

pub fn hessian_from_half(h: &[f64; 6]) -> [[f64; 3]; 3] {
    [[h[0], h[3], h[4]], [h[3], h[1], h[5]], [h[4], h[5], h[2]]]
}

/// Layout of `theta = (u', kappa', kappa_1, ..., kappa_k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ThetaLayout {
    pub k: usize,
}

impl ThetaLayout {
    pub const fn new(k: usize) -> Self {
        Self { k }
    }

    pub const fn dim(&self) -> usize {
        1 + KAPPA_LEN * (self.k + 1)
    }

    pub const fn u_prime(&self) -> usize {
        0
    }

    pub const fn query_kappa(&self) -> Range<usize> {
        1..1 + KAPPA_LEN
    }

    /// Block of neighbour `i` (zero-based).
    pub const fn neighbor_kappa(&self, i: usize) -> Range<usize> {
        let start = 1 + KAPPA_LEN * (i + 1);
        start..start + KAPPA_LEN
    }

    /// Block of point `j` where `0` is the query and `i + 1` is neighbour `i`.
    pub const fn point_kappa(&self, j: usize) -> Range<usize> {
        let start = 1 + KAPPA_LEN * j;
        start..start + KAPPA_LEN
    }

    /// Indices of every slack entry (`eps_g`, `eps_Q` of each point).
    pub fn slack_indices(&self) -> impl Iterator<Item = usize> + '_ {
        (0..=self.k).flat_map(move |j| {
            let s = self.point_kappa(j).start;
            [s + EPS_G_OFFSET, s + EPS_Q_OFFSET]
        })
    }

    pub fn is_slack(&self, idx: usize) -> bool {
        idx >= 1 && {
            let off = (idx - 1) % KAPPA_LEN;
            off == EPS_G_OFFSET || off == EPS_Q_OFFSET
        }
    }
}
