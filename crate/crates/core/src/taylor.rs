//! Taylor-consistency inequalities.
//!
//! For two points `a` (expanded to) and `b` (expanded from) with scaled
//! displacement `xi = x_a - x_b`, the quadrature-based expansion gives
//!
//! ```text
//! | u_a - u_b - 1/2 xi.(g_a + g_b) - 1/12 lambda.(h_b - h_a) |
//!       <= (eps_g_a + eps_g_b) r^5 + eps_Q_b r^4
//! ```
//!
//! and the mirrored expansion of `u_b` about `a` charges the quartic term to
//! `eps_Q_a` instead. Each absolute value becomes a `+/-` pair of rows, so a
//! block always has four rows. A query block has an extra column for the
//! unknown state `u'`; in a sample pair block both states are known and move
//! to the right-hand side.
//!
//! Slack variables are scaled remainder magnitudes: the constant factors of
//! the remainder bounds are absorbed into them.

use alloc::vec;
use alloc::vec::Vec;

use crate::quadrature::ExpansionCoefficients;
use crate::types::{
    displacement, AxisScaling, Displacement, Sample, SpatioTemporalPoint, ThetaLayout, EPS_G_OFFSET,
    EPS_Q_OFFSET, G_OFFSET, H_OFFSET, KAPPA_LEN,
};
use crate::{Error, Result};

/// Which part of `theta` a run of block columns addresses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockColumns {
    /// The query state `u'` (one column).
    UPrime,
    /// The query's field-variable block (11 columns).
    QueryKappa,
    /// The field variables of the first sample argument.
    FirstKappa,
    /// The field variables of the second sample argument.
    SecondKappa,
}

impl BlockColumns {
    pub const fn width(self) -> usize {
        match self {
            BlockColumns::UPrime => 1,
            _ => KAPPA_LEN,
        }
    }
}

/// Four inequality rows `rows * [targets...] <= rhs`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintBlock {
    pub targets: &'static [BlockColumns],
    /// Row-major, `4 x width`.
    pub rows: Vec<f64>,
    pub rhs: [f64; 4],
}

impl ConstraintBlock {
    pub fn width(&self) -> usize {
        self.targets.iter().map(|t| t.width()).sum()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.rows[i * w..(i + 1) * w]
    }

    /// Column offsets of each slack entry within a row.
    pub fn slack_columns(&self) -> Vec<usize> {
        let mut out = Vec::new();
        let mut off = 0;
        for t in self.targets {
            if *t != BlockColumns::UPrime {
                out.push(off + EPS_G_OFFSET);
                out.push(off + EPS_Q_OFFSET);
            }
            off += t.width();
        }
        out
    }

    /// `max_i (row_i . v - rhs_i)` where `v` is laid out like the block columns.
    pub fn max_violation(&self, v: &[f64]) -> f64 {
        (0..4)
            .map(|i| dot(self.row(i), v) - self.rhs[i])
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Rows over `[u_a, kappa_a, kappa_b]` for the expansion pair between `a`
/// (where `xi = x_a - x_b` points to) and `b`; each row's right-hand side is
/// `rhs_sign[i] * u_b`.
const PAIR_WIDTH: usize = 1 + 2 * KAPPA_LEN;
const RHS_SIGN: [f64; 4] = [1.0, -1.0, -1.0, 1.0];

fn expansion_rows(d: &Displacement, c: &ExpansionCoefficients) -> [[f64; PAIR_WIDTH]; 4] {
    let r4 = d.r * d.r * d.r * d.r;
    let r5 = r4 * d.r;
    let a = 1;
    let b = 1 + KAPPA_LEN;
    // forward: F = u_a - u_b - c.g_to xi.g_a - c.g_from xi.g_b - c.h_to lam.h_a - c.h_from lam.h_b
    let mut fwd = [0.0; PAIR_WIDTH];
    fwd[0] = 1.0;
    // backward expansion of u_b about a, displacement -xi:
    // B = u_b - u_a + c.g_from xi.g_a + c.g_to xi.g_b - c.h_from lam.h_a - c.h_to lam.h_b
    // row3 is B <= slack written with u_b on the right, i.e. -(u_a - ...) form.
    let mut bwd = [0.0; PAIR_WIDTH];
    bwd[0] = -1.0;
    for q in 0..3 {
        fwd[a + G_OFFSET + q] = -c.g_to * d.xi[q];
        fwd[b + G_OFFSET + q] = -c.g_from * d.xi[q];
        bwd[a + G_OFFSET + q] = c.g_from * d.xi[q];
        bwd[b + G_OFFSET + q] = c.g_to * d.xi[q];
    }
    for q in 0..6 {
        fwd[a + H_OFFSET + q] = -c.h_to * d.lambda[q];
        fwd[b + H_OFFSET + q] = -c.h_from * d.lambda[q];
        bwd[a + H_OFFSET + q] = -c.h_from * d.lambda[q];
        bwd[b + H_OFFSET + q] = -c.h_to * d.lambda[q];
    }
    let mut rows = [fwd, neg(&fwd), bwd, neg(&bwd)];
    for (i, row) in rows.iter_mut().enumerate() {
        row[a + EPS_G_OFFSET] = -r5;
        row[b + EPS_G_OFFSET] = -r5;
        if i < 2 {
            row[a + EPS_Q_OFFSET] = 0.0;
            row[b + EPS_Q_OFFSET] = -r4;
        } else {
            row[a + EPS_Q_OFFSET] = -r4;
            row[b + EPS_Q_OFFSET] = 0.0;
        }
    }
    rows
}

fn neg(row: &[f64; PAIR_WIDTH]) -> [f64; PAIR_WIDTH] {
    let mut out = [0.0; PAIR_WIDTH];
    for (o, v) in out.iter_mut().zip(row) {
        *o = -*v;
    }
    out
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

const QUERY_TARGETS: &[BlockColumns] =
    &[BlockColumns::UPrime, BlockColumns::QueryKappa, BlockColumns::FirstKappa];
const PAIR_TARGETS: &[BlockColumns] = &[BlockColumns::FirstKappa, BlockColumns::SecondKappa];

/// Query–sample block over `(u', kappa', kappa_i)`.
pub fn query_sample_block(query: &SpatioTemporalPoint, sample: &Sample, scaling: &AxisScaling) -> ConstraintBlock {
    let d = displacement(&sample.point, query, scaling);
    let rows = expansion_rows(&d, &ExpansionCoefficients::lobatto3());
    ConstraintBlock {
        targets: QUERY_TARGETS,
        rows: rows.iter().flat_map(|r| r.iter().copied()).collect(),
        rhs: RHS_SIGN.map(|s| s * sample.u),
    }
}

/// Sample–sample block over `(kappa_a, kappa_b)`; `a` takes the role the
/// query plays in [`query_sample_block`], with its known state moved to the
/// right-hand side.
pub fn sample_pair_block(a: &Sample, b: &Sample, scaling: &AxisScaling) -> ConstraintBlock {
    let d = displacement(&b.point, &a.point, scaling);
    let rows = expansion_rows(&d, &ExpansionCoefficients::lobatto3());
    let mut flat = Vec::with_capacity(4 * 2 * KAPPA_LEN);
    let mut rhs = [0.0; 4];
    for (i, row) in rows.iter().enumerate() {
        flat.extend_from_slice(&row[1..]);
        rhs[i] = RHS_SIGN[i] * b.u - row[0] * a.u;
    }
    ConstraintBlock { targets: PAIR_TARGETS, rows: flat, rhs }
}

/// Dense aggregated system `A theta <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSystem {
    /// Row-major `m x layout.dim()`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub layout: ThetaLayout,
    /// Coordinate scaling the coefficients were built with; derivative
    /// columns refer to scaled coordinates.
    pub scaling: AxisScaling,
}

impl ConstraintSystem {
    pub const fn expected_rows(k: usize) -> usize {
        4 * k + 2 * k * k.saturating_sub(1)
    }

    pub fn rows(&self) -> usize {
        self.b.len()
    }

    pub fn cols(&self) -> usize {
        self.layout.dim()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.cols();
        &self.a[i * n..(i + 1) * n]
    }

    /// `A theta - b`.
    pub fn residuals(&self, theta: &[f64]) -> Vec<f64> {
        (0..self.rows()).map(|i| dot(self.row(i), theta) - self.b[i]).collect()
    }

    pub fn max_violation(&self, theta: &[f64]) -> f64 {
        self.residuals(theta).into_iter().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Stacks all query–sample blocks (by neighbour index) followed by the sample
/// pair blocks in lexicographic `(i < j)` order.
pub fn assemble(query: &SpatioTemporalPoint, neighbors: &[Sample], scaling: &AxisScaling) -> Result<ConstraintSystem> {
    let k = neighbors.len();
    if k == 0 {
        return Err(Error::EmptyNeighbors);
    }
    let layout = ThetaLayout::new(k);
    let n = layout.dim();
    let m = ConstraintSystem::expected_rows(k);
    let coeffs = ExpansionCoefficients::lobatto3();
    let mut a = vec![0.0; m * n];
    let mut b = vec![0.0; m];
    let mut row = 0;

    let query_start = layout.query_kappa().start;
    for (i, s) in neighbors.iter().enumerate() {
        let d = displacement(&s.point, query, scaling);
        let rows = expansion_rows(&d, &coeffs);
        let nb = layout.neighbor_kappa(i).start;
        for (q, r) in rows.iter().enumerate() {
            let dst = &mut a[row * n..(row + 1) * n];
            dst[layout.u_prime()] = r[0];
            dst[query_start..query_start + KAPPA_LEN].copy_from_slice(&r[1..1 + KAPPA_LEN]);
            dst[nb..nb + KAPPA_LEN].copy_from_slice(&r[1 + KAPPA_LEN..]);
            b[row] = RHS_SIGN[q] * s.u;
            row += 1;
        }
    }

    for i in 0..k {
        for j in i + 1..k {
            let (si, sj) = (&neighbors[i], &neighbors[j]);
            let d = displacement(&sj.point, &si.point, scaling);
            if d.r == 0.0 {
                return Err(Error::DuplicateNeighbor { first: i, second: j });
            }
            let rows = expansion_rows(&d, &coeffs);
            let (ci, cj) = (layout.neighbor_kappa(i).start, layout.neighbor_kappa(j).start);
            for (q, r) in rows.iter().enumerate() {
                let dst = &mut a[row * n..(row + 1) * n];
                dst[ci..ci + KAPPA_LEN].copy_from_slice(&r[1..1 + KAPPA_LEN]);
                dst[cj..cj + KAPPA_LEN].copy_from_slice(&r[1 + KAPPA_LEN..]);
                b[row] = RHS_SIGN[q] * sj.u - r[0] * si.u;
                row += 1;
            }
        }
    }
    debug_assert_eq!(row, m);
    Ok(ConstraintSystem { a, b, layout, scaling: *scaling })
}
