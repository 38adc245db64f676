//! Dense convex QP with a diagonal Hessian, solved by a primal-dual
//! interior-point method with Mehrotra predictor–corrector steps.
//!
//! ```text
//! minimise    1/2 x^T diag(p) x + q^T x
//! subject to  A x <= b,   A_eq x = b_eq,   x_j >= lower_j
//! ```
//!
//! Each iteration forms the normal matrix `diag(p) + G^T W G` from the
//! nonzeros of every inequality row (bounds included), factors it by
//! Cholesky and handles the equalities through their Schur complement.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::{backward_solve, cholesky_in_place, cholesky_solve, dot, forward_solve, norm_inf};

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub n: usize,
    /// Diagonal of the objective Hessian.
    pub p_diag: Vec<f64>,
    pub q: Vec<f64>,
    /// Row-major `m x n`.
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    /// Row-major `p x n`.
    pub a_eq: Vec<f64>,
    pub b_eq: Vec<f64>,
    /// `f64::NEG_INFINITY` marks an unbounded entry.
    pub lower: Vec<f64>,
}

impl QpProblem {
    /// Unconstrained problem with Hessian `diag(p_diag)` and zero linear term.
    pub fn new(p_diag: Vec<f64>) -> Self {
        let n = p_diag.len();
        Self {
            n,
            p_diag,
            q: vec![0.0; n],
            a: Vec::new(),
            b: Vec::new(),
            a_eq: Vec::new(),
            b_eq: Vec::new(),
            lower: vec![f64::NEG_INFINITY; n],
        }
    }

    pub fn push_inequality(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n);
        self.a.extend_from_slice(row);
        self.b.push(rhs);
    }

    pub fn push_equality(&mut self, row: &[f64], rhs: f64) {
        assert_eq!(row.len(), self.n);
        self.a_eq.extend_from_slice(row);
        self.b_eq.push(rhs);
    }

    pub fn inequality_count(&self) -> usize {
        self.b.len()
    }

    pub fn equality_count(&self) -> usize {
        self.b_eq.len()
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.p_diag)
            .zip(&self.q)
            .map(|((xi, pi), qi)| 0.5 * pi * xi * xi + qi * xi)
            .sum()
    }

    /// Minimum Hessian diagonal entry; positive for a strictly convex problem.
    pub fn min_curvature(&self) -> f64 {
        self.p_diag.iter().cloned().fold(f64::INFINITY, f64::min)
    }

    /// Stationarity, primal feasibility and complementarity of `(x, mu, nu,
    /// bound multipliers)` measured on the original problem data.
    ///
    /// Each residual is relative: stationarity is divided by the largest of
    /// `1`, `|P x|`, `|q|` and the multiplier terms, feasibility by the
    /// largest of `1`, the row activities and right-hand sides, and
    /// complementarity by `1 + |x^T P x|`.
    pub fn kkt_residuals(&self, x: &[f64], ineq: &[f64], eq: &[f64], bound: &[f64]) -> [f64; 3] {
        let n = self.n;
        let mut grad: Vec<f64> = (0..n).map(|j| self.p_diag[j] * x[j] + self.q[j]).collect();
        let mut dual_scale = norm_inf(&self.q).max(1.0);
        for j in 0..n {
            dual_scale = dual_scale.max((self.p_diag[j] * x[j]).abs());
        }
        let mut term = vec![0.0; n];
        for (i, &mu) in ineq.iter().enumerate() {
            axpy(&mut term, mu, &self.a[i * n..(i + 1) * n]);
        }
        for (i, &nu) in eq.iter().enumerate() {
            axpy(&mut term, nu, &self.a_eq[i * n..(i + 1) * n]);
        }
        for (j, &mu) in bound.iter().enumerate() {
            dual_scale = dual_scale.max(mu.abs());
            term[j] -= mu;
        }
        dual_scale = dual_scale.max(norm_inf(&term));
        axpy(&mut grad, 1.0, &term);
        let stationarity = norm_inf(&grad) / dual_scale;

        let mut primal_scale: f64 = 1.0;
        let mut feas: f64 = 0.0;
        let mut comp: f64 = 0.0;
        for (i, &mu) in ineq.iter().enumerate() {
            let ax = dot(&self.a[i * n..(i + 1) * n], x);
            primal_scale = primal_scale.max(ax.abs()).max(self.b[i].abs());
            let r = ax - self.b[i];
            feas = feas.max(r);
            comp = comp.max((mu * r).abs());
        }
        for i in 0..self.equality_count() {
            let ax = dot(&self.a_eq[i * n..(i + 1) * n], x);
            primal_scale = primal_scale.max(ax.abs()).max(self.b_eq[i].abs());
            feas = feas.max((ax - self.b_eq[i]).abs());
        }
        for j in 0..n {
            if self.lower[j].is_finite() {
                let r = self.lower[j] - x[j];
                primal_scale = primal_scale.max(x[j].abs()).max(self.lower[j].abs());
                feas = feas.max(r);
                comp = comp.max((bound[j] * r).abs());
            }
        }
        let curv: f64 = (0..n).map(|j| self.p_diag[j] * x[j] * x[j]).sum();
        [stationarity, feas / primal_scale, comp / (1.0 + curv)]
    }
}

fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    if a != 0.0 {
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += a * xi;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QpSettings {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for QpSettings {
    fn default() -> Self {
        Self { tol: 1e-8, max_iter: 200 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SolveStatus {
    Optimal,
    MaxIter,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::MaxIter => "max_iter",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::NumericalFailure => "numerical_failure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub theta: Vec<f64>,
    pub objective: f64,
    pub kkt_stationarity: f64,
    pub kkt_feasibility: f64,
    pub kkt_complementarity: f64,
    /// Interior-point iterations (summed over outer iterations for
    /// [`crate::sqp::solve_dcbr`]).
    pub iterations: usize,
    pub outer_iterations: usize,
    pub status: SolveStatus,
    pub ineq_multipliers: Vec<f64>,
    pub eq_multipliers: Vec<f64>,
    pub bound_multipliers: Vec<f64>,
    /// Normalised Farkas residual when `status == Infeasible`.
    pub infeasibility_certificate: Option<f64>,
    /// Merit before and after every damped outer step (empty for a plain QP).
    pub merit_history: Vec<(f64, f64)>,
}

impl SolveReport {
    pub fn kkt_max(&self) -> f64 {
        self.kkt_stationarity.max(self.kkt_feasibility).max(self.kkt_complementarity)
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

/// Inequality rows (general rows followed by one row per finite bound) in
/// compressed sparse row form.
struct SparseRows {
    starts: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    rhs: Vec<f64>,
}

impl SparseRows {
    fn from_dense(a: &[f64], n: usize, rhs: &[f64]) -> Self {
        let mut s = SparseRows { starts: vec![0], cols: Vec::new(), vals: Vec::new(), rhs: Vec::new() };
        for (i, &r) in rhs.iter().enumerate() {
            for (j, &v) in a[i * n..(i + 1) * n].iter().enumerate() {
                if v != 0.0 {
                    s.cols.push(j);
                    s.vals.push(v);
                }
            }
            s.starts.push(s.cols.len());
            s.rhs.push(r);
        }
        s
    }

    fn push_single(&mut self, col: usize, val: f64, rhs: f64) {
        self.cols.push(col);
        self.vals.push(val);
        self.starts.push(self.cols.len());
        self.rhs.push(rhs);
    }

    fn len(&self) -> usize {
        self.rhs.len()
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.starts[i], self.starts[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    fn row_dot(&self, i: usize, x: &[f64]) -> f64 {
        let (c, v) = self.row(i);
        c.iter().zip(v).map(|(&j, &a)| a * x[j]).sum()
    }

    /// `y += G^T w`.
    fn add_transpose(&self, w: &[f64], y: &mut [f64]) {
        for (i, &wi) in w.iter().enumerate() {
            if wi != 0.0 {
                let (c, v) = self.row(i);
                for (&j, &a) in c.iter().zip(v) {
                    y[j] += a * wi;
                }
            }
        }
    }
}

struct Newton {
    dx: Vec<f64>,
    ds: Vec<f64>,
    dz: Vec<f64>,
    dy: Vec<f64>,
}

/// Factored normal matrix for one interior-point iteration.
struct Factor {
    n: usize,
    l: Vec<f64>,
    /// `L^{-1} E^T`, column `i` stored contiguously.
    l_inv_et: Vec<f64>,
    schur: Vec<f64>,
    p: usize,
}

impl Factor {
    fn solve(&self, rhs: &[f64], re: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let n = self.n;
        let mut w = rhs.to_vec();
        forward_solve(&self.l, n, &mut w, 0);
        if self.p == 0 {
            backward_solve(&self.l, n, &mut w);
            return (w, Vec::new());
        }
        // (E K^-1 E^T) dy = E K^-1 r1 + re
        let mut dy: Vec<f64> = (0..self.p).map(|i| dot(&self.l_inv_et[i * n..(i + 1) * n], &w) + re[i]).collect();
        cholesky_solve(&self.schur, self.p, &mut dy);
        for (i, &yi) in dy.iter().enumerate() {
            axpy(&mut w, -yi, &self.l_inv_et[i * n..(i + 1) * n]);
        }
        backward_solve(&self.l, n, &mut w);
        (w, dy)
    }
}

/// Iterations without a new best residual after which the solve stops.
const STALL_ITERS: usize = 40;

/// Barrier weights `z / s` are clamped to this range before factorising.
const W_MIN: f64 = 1e-30;
const W_MAX: f64 = 1e30;

pub fn solve_qp(prob: &QpProblem, settings: &QpSettings) -> SolveReport {
    solve_qp_from(prob, settings, None)
}

/// As [`solve_qp`], optionally seeding the primal iterate (the interior
/// slacks are still re-centred).
pub fn solve_qp_from(orig: &QpProblem, settings: &QpSettings, x0: Option<&[f64]>) -> SolveReport {
    let n = orig.n;
    let m_gen = orig.inequality_count();
    // the iteration runs on the equilibrated problem; every residual that is
    // reported or tested is measured on the original one
    let scale = Equilibration::new(orig);
    let prob = &scale.apply(orig);
    let mut g = SparseRows::from_dense(&prob.a, n, &prob.b);
    let mut bound_cols = Vec::new();
    for j in 0..n {
        if prob.lower[j].is_finite() {
            g.push_single(j, -1.0, -prob.lower[j]);
            bound_cols.push(j);
        }
    }
    let eq = SparseRows::from_dense(&prob.a_eq, n, &prob.b_eq);
    let mi = g.len();
    let p = eq.len();
    let tol = settings.tol;

    let mut report = SolveReport {
        theta: vec![0.0; n],
        objective: 0.0,
        kkt_stationarity: f64::INFINITY,
        kkt_feasibility: f64::INFINITY,
        kkt_complementarity: f64::INFINITY,
        iterations: 0,
        outer_iterations: 0,
        status: SolveStatus::MaxIter,
        ineq_multipliers: vec![0.0; m_gen],
        eq_multipliers: vec![0.0; p],
        bound_multipliers: vec![0.0; n],
        infeasibility_certificate: None,
        merit_history: Vec::new(),
    };

    // multipliers and primal point mapped back to the original problem
    let unscale = |x: &[f64], z: &[f64], y: &[f64]| {
        let mut bound = vec![0.0; n];
        for (k, &j) in bound_cols.iter().enumerate() {
            bound[j] = z[m_gen + k] / scale.col[j];
        }
        let xo: Vec<f64> = x.iter().zip(&scale.col).map(|(v, d)| v * d).collect();
        let zo: Vec<f64> = z[..m_gen].iter().zip(&scale.row).map(|(v, e)| v * e).collect();
        let yo: Vec<f64> = y.iter().zip(&scale.row_eq).map(|(v, e)| v * e).collect();
        (xo, zo, yo, bound)
    };

    // initial point: W = I solve, then shift s and z into the interior
    let ones = vec![1.0; mi];
    let Some(factor) = factorise(prob, &g, &eq, &ones) else {
        report.status = SolveStatus::NumericalFailure;
        return report;
    };
    let mut x;
    let mut y;
    {
        let mut rhs: Vec<f64> = prob.q.iter().map(|v| -v).collect();
        g.add_transpose(&g.rhs, &mut rhs);
        let re: Vec<f64> = prob.b_eq.iter().map(|v| -v).collect();
        let (x_init, y_init) = factor.solve(&rhs, &re);
        x = x_init;
        y = y_init;
    }
    if let Some(x0) = x0 {
        for j in 0..n {
            x[j] = x0[j] / scale.col[j];
        }
    }
    let mut s: Vec<f64> = (0..mi).map(|i| g.rhs[i] - g.row_dot(i, &x)).collect();
    let mut z: Vec<f64> = s.iter().map(|v| -v).collect();
    shift_positive(&mut s);
    shift_positive(&mut z);

    let mut best: Option<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> = None;
    let mut best_iter = 0;
    let mut rd = vec![0.0; n];
    let mut rp = vec![0.0; mi];
    let mut re = vec![0.0; p];

    for iter in 0..=settings.max_iter {
        report.iterations = iter;
        // residuals
        for j in 0..n {
            rd[j] = prob.p_diag[j] * x[j] + prob.q[j];
        }
        g.add_transpose(&z, &mut rd);
        eq.add_transpose(&y, &mut rd);
        for i in 0..mi {
            rp[i] = g.row_dot(i, &x) + s[i] - g.rhs[i];
        }
        for i in 0..p {
            re[i] = eq.row_dot(i, &x) - eq.rhs[i];
        }
        let mu = if mi > 0 { dot(&s, &z) / mi as f64 } else { 0.0 };

        let (xo, zo, yo, bo) = unscale(&x, &z, &y);
        let kkt = orig.kkt_residuals(&xo, &zo, &yo, &bo);
        if kkt.iter().any(|v| !v.is_finite()) {
            report.status = SolveStatus::NumericalFailure;
            break;
        }
        let worst = kkt[0].max(kkt[1]).max(kkt[2]);
        if best.as_ref().map_or(true, |b| worst < b.0) {
            best = Some((worst, x.clone(), z.clone(), y.clone()));
            best_iter = iter;
        } else if iter - best_iter >= STALL_ITERS {
            report.status = SolveStatus::MaxIter;
            break;
        }
        if worst <= tol {
            report.status = SolveStatus::Optimal;
            break;
        }
        if let Some(cert) = farkas_residual(&g, &eq, &z, &y, n) {
            if cert <= tol && norm_inf(&rp).max(norm_inf(&re)) > tol {
                report.status = SolveStatus::Infeasible;
                report.infeasibility_certificate = Some(cert);
                break;
            }
        }
        if iter == settings.max_iter {
            report.status = SolveStatus::MaxIter;
            break;
        }

        let w: Vec<f64> = (0..mi).map(|i| (z[i] / s[i]).clamp(W_MIN, W_MAX)).collect();
        let Some(factor) = factorise(prob, &g, &eq, &w) else {
            report.status = SolveStatus::NumericalFailure;
            break;
        };

        // predictor
        let rc_aff: Vec<f64> = (0..mi).map(|i| s[i] * z[i]).collect();
        let aff = newton_step(&factor, prob, &g, &eq, &s, &z, &w, &rd, &rp, &re, &rc_aff);
        let alpha_aff = max_step(&s, &aff.ds).min(max_step(&z, &aff.dz)).min(1.0);
        let mu_aff = if mi > 0 {
            (0..mi)
                .map(|i| (s[i] + alpha_aff * aff.ds[i]) * (z[i] + alpha_aff * aff.dz[i]))
                .sum::<f64>()
                / mi as f64
        } else {
            0.0
        };
        let sigma = if mu > 0.0 { { let r = mu_aff / mu; (r * r * r).clamp(0.0, 1.0) } } else { 0.0 };

        // corrector
        let rc: Vec<f64> = (0..mi)
            .map(|i| s[i] * z[i] + aff.ds[i] * aff.dz[i] - sigma * mu)
            .collect();
        let step = newton_step(&factor, prob, &g, &eq, &s, &z, &w, &rd, &rp, &re, &rc);
        let alpha = (0.99 * max_step(&s, &step.ds).min(max_step(&z, &step.dz))).min(1.0);
        if !alpha.is_finite() {
            report.status = SolveStatus::NumericalFailure;
            break;
        }
        axpy(&mut x, alpha, &step.dx);
        axpy(&mut s, alpha, &step.ds);
        axpy(&mut z, alpha, &step.dz);
        axpy(&mut y, alpha, &step.dy);
        for v in s.iter_mut().chain(z.iter_mut()) {
            if *v <= 0.0 {
                *v = f64::MIN_POSITIVE;
            }
        }
    }

    if report.status != SolveStatus::Optimal && report.status != SolveStatus::Infeasible {
        if let Some((_, bx, bz, by)) = best {
            x = bx;
            z = bz;
            y = by;
        }
    }
    let (xo, zo, yo, bo) = unscale(&x, &z, &y);
    let kkt = orig.kkt_residuals(&xo, &zo, &yo, &bo);
    report.kkt_stationarity = kkt[0];
    report.kkt_feasibility = kkt[1];
    report.kkt_complementarity = kkt[2];
    report.objective = orig.objective(&xo);
    report.theta = xo;
    report.ineq_multipliers = zo;
    report.eq_multipliers = yo;
    report.bound_multipliers = bo;
    report
}

/// Diagonal Ruiz scaling `x = D x_hat`, rows multiplied by `E`.
struct Equilibration {
    col: Vec<f64>,
    row: Vec<f64>,
    row_eq: Vec<f64>,
}

impl Equilibration {
    const PASSES: usize = 12;

    fn new(p: &QpProblem) -> Self {
        let n = p.n;
        let ineq = SparseRows::from_dense(&p.a, n, &p.b);
        let eq = SparseRows::from_dense(&p.a_eq, n, &p.b_eq);
        let mut col = vec![1.0; n];
        let mut row = vec![1.0; ineq.len()];
        let mut row_eq = vec![1.0; eq.len()];
        let mut cnorm = vec![0.0f64; n];
        for _ in 0..Self::PASSES {
            for j in 0..n {
                cnorm[j] = p.p_diag[j] * col[j] * col[j];
            }
            let mut rows = |a: &SparseRows, e: &mut [f64]| {
                for (i, ei) in e.iter_mut().enumerate() {
                    let mut rmax: f64 = 0.0;
                    let (c, v) = a.row(i);
                    for (&j, &v) in c.iter().zip(v) {
                        let s = (v * *ei * col[j]).abs();
                        rmax = rmax.max(s);
                        cnorm[j] = cnorm[j].max(s);
                    }
                    if rmax > 0.0 {
                        *ei /= libm::sqrt(rmax);
                    }
                }
            };
            rows(&ineq, &mut row);
            rows(&eq, &mut row_eq);
            for j in 0..n {
                if cnorm[j] > 0.0 {
                    col[j] /= libm::sqrt(cnorm[j]);
                }
            }
        }
        Self { col, row, row_eq }
    }

    fn apply(&self, p: &QpProblem) -> QpProblem {
        let n = p.n;
        let d = &self.col;
        let scale_rows = |a: &[f64], e: &[f64]| -> Vec<f64> {
            let mut out = a.to_vec();
            for (i, ei) in e.iter().enumerate() {
                for (j, v) in out[i * n..(i + 1) * n].iter_mut().enumerate() {
                    *v *= ei * d[j];
                }
            }
            out
        };
        QpProblem {
            n,
            p_diag: p.p_diag.iter().zip(d).map(|(v, dj)| v * dj * dj).collect(),
            q: p.q.iter().zip(d).map(|(v, dj)| v * dj).collect(),
            a: scale_rows(&p.a, &self.row),
            b: p.b.iter().zip(&self.row).map(|(v, e)| v * e).collect(),
            a_eq: scale_rows(&p.a_eq, &self.row_eq),
            b_eq: p.b_eq.iter().zip(&self.row_eq).map(|(v, e)| v * e).collect(),
            lower: p.lower.iter().zip(d).map(|(v, dj)| v / dj).collect(),
        }
    }
}

fn shift_positive(v: &mut [f64]) {
    let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
    if v.is_empty() {
        return;
    }
    if lo <= 0.0 {
        let shift = 1.0 - lo;
        v.iter_mut().for_each(|x| *x += shift);
    }
}

/// Largest `alpha` keeping `v + alpha dv >= 0`.
fn max_step(v: &[f64], dv: &[f64]) -> f64 {
    v.iter()
        .zip(dv)
        .filter(|(_, d)| **d < 0.0)
        .map(|(x, d)| -x / d)
        .fold(f64::INFINITY, f64::min)
}

/// `||G^T z + E^T y||_inf / -(h^T z + d^T y)` when the denominator is
/// positive, which certifies infeasibility of the constraints as it tends
/// to zero.
fn farkas_residual(g: &SparseRows, eq: &SparseRows, z: &[f64], y: &[f64], n: usize) -> Option<f64> {
    let denom = -(dot(&g.rhs, z) + dot(&eq.rhs, y));
    if !(denom > 0.0) {
        return None;
    }
    let mut v = vec![0.0; n];
    g.add_transpose(z, &mut v);
    eq.add_transpose(y, &mut v);
    let scale = norm_inf(z).max(norm_inf(y));
    if scale < 1e6 {
        return None;
    }
    Some(norm_inf(&v) / denom)
}

fn factorise(prob: &QpProblem, g: &SparseRows, eq: &SparseRows, w: &[f64]) -> Option<Factor> {
    let n = prob.n;
    let mut k = vec![0.0; n * n];
    for j in 0..n {
        k[j * n + j] = prob.p_diag[j];
    }
    for (i, &wi) in w.iter().enumerate() {
        let (c, v) = g.row(i);
        for a in 0..c.len() {
            let (ca, va) = (c[a], wi * v[a]);
            for b in 0..c.len() {
                let cb = c[b];
                if cb <= ca {
                    k[ca * n + cb] += va * v[b];
                }
            }
        }
    }
    let diag_max = (0..n).map(|j| k[j * n + j]).fold(0.0, f64::max);
    let floor = (diag_max * 1e-20).max(1e-300);
    cholesky_in_place(&mut k, n, floor)?;

    let p = eq.len();
    let mut l_inv_et = vec![0.0; p * n];
    for i in 0..p {
        let col = &mut l_inv_et[i * n..(i + 1) * n];
        let (c, v) = eq.row(i);
        for (&j, &a) in c.iter().zip(v) {
            col[j] = a;
        }
        forward_solve(&k, n, col, c.iter().copied().min().unwrap_or(n));
    }
    let mut schur = vec![0.0; p * p];
    for i in 0..p {
        for j in 0..=i {
            schur[i * p + j] = dot(&l_inv_et[i * n..(i + 1) * n], &l_inv_et[j * n..(j + 1) * n]);
        }
    }
    if p > 0 {
        let smax = (0..p).map(|i| schur[i * p + i]).fold(0.0, f64::max);
        cholesky_in_place(&mut schur, p, (smax * 1e-20).max(1e-300))?;
    }
    Some(Factor { n, l: k, l_inv_et, schur, p })
}

/// Newton step for the perturbed KKT system, with two rounds of iterative
/// refinement against the unreduced equations (the normal-equation solve
/// loses accuracy once the barrier weights spread over many decades).
#[allow(clippy::too_many_arguments)]
fn newton_step(
    f: &Factor,
    prob: &QpProblem,
    g: &SparseRows,
    eq: &SparseRows,
    s: &[f64],
    z: &[f64],
    w: &[f64],
    rd: &[f64],
    rp: &[f64],
    re: &[f64],
    rc: &[f64],
) -> Newton {
    let mut step = reduced_step(f, g, s, z, w, rd, rp, re, rc);
    let zeros_m = vec![0.0; s.len()];
    for _ in 0..2 {
        // ds and dz satisfy their rows exactly; only these two can drift
        let mut e1: Vec<f64> = (0..prob.n).map(|j| prob.p_diag[j] * step.dx[j] + rd[j]).collect();
        g.add_transpose(&step.dz, &mut e1);
        eq.add_transpose(&step.dy, &mut e1);
        let e3: Vec<f64> = (0..eq.len()).map(|i| eq.row_dot(i, &step.dx) + re[i]).collect();
        let scale = 1.0 + norm_inf(rd).max(norm_inf(re));
        if norm_inf(&e1).max(norm_inf(&e3)) <= 1e-12 * scale {
            break;
        }
        let c = reduced_step(f, g, s, z, w, &e1, &zeros_m, &e3, &zeros_m);
        axpy(&mut step.dx, 1.0, &c.dx);
        axpy(&mut step.ds, 1.0, &c.ds);
        axpy(&mut step.dz, 1.0, &c.dz);
        axpy(&mut step.dy, 1.0, &c.dy);
    }
    step
}

#[allow(clippy::too_many_arguments)]
fn reduced_step(
    f: &Factor,
    g: &SparseRows,
    s: &[f64],
    z: &[f64],
    w: &[f64],
    rd: &[f64],
    rp: &[f64],
    re: &[f64],
    rc: &[f64],
) -> Newton {
    let mi = s.len();
    // r1 = -rd - G^T S^-1 (Z rp - rc)
    let t: Vec<f64> = (0..mi).map(|i| (z[i] * rp[i] - rc[i]) / s[i]).collect();
    let mut r1: Vec<f64> = rd.iter().map(|v| -v).collect();
    let neg_t: Vec<f64> = t.iter().map(|v| -v).collect();
    g.add_transpose(&neg_t, &mut r1);
    let (dx, dy) = f.solve(&r1, re);
    let mut ds = vec![0.0; mi];
    let mut dz = vec![0.0; mi];
    for i in 0..mi {
        let gdx = g.row_dot(i, &dx);
        ds[i] = -rp[i] - gdx;
        dz[i] = t[i] + w[i] * gdx;
    }
    Newton { dx, ds, dz, dy }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn halfplane_constrained_norm() {
        // min x^2 + y^2 s.t. x + y >= 2
        let mut p = QpProblem::new(vec![2.0, 2.0]);
        p.push_inequality(&[-1.0, -1.0], -2.0);
        let r = solve_qp(&p, &QpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.theta[0] - 1.0).abs() < 1e-8 && (r.theta[1] - 1.0).abs() < 1e-8, "{:?}", r.theta);
        assert!((r.objective - 2.0).abs() < 1e-8);
        assert!((r.ineq_multipliers[0] - 2.0).abs() < 1e-8);
        assert!(r.kkt_max() <= 1e-8);
    }

    #[test]
    fn unconstrained_regularised() {
        let p = QpProblem::new(vec![2e-9; 5]);
        let r = solve_qp(&p, &QpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.theta.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn equality_only() {
        // min x^2 + y^2 s.t. x - y = 4
        let mut p = QpProblem::new(vec![2.0, 2.0]);
        p.push_equality(&[1.0, -1.0], 4.0);
        let r = solve_qp(&p, &QpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!((r.theta[0] - 2.0).abs() < 1e-8 && (r.theta[1] + 2.0).abs() < 1e-8);
    }

    #[test]
    fn lower_bound_active() {
        // min (x + 1)^2 s.t. x >= 0  ->  x = 0, bound multiplier 2
        let mut p = QpProblem::new(vec![2.0]);
        p.q[0] = 2.0;
        p.lower[0] = 0.0;
        let r = solve_qp(&p, &QpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert!(r.theta[0].abs() < 1e-8);
        assert!((r.bound_multipliers[0] - 2.0).abs() < 1e-6);
    }

    #[test]
    fn detects_infeasibility() {
        // x <= -1 and x >= 1
        let mut p = QpProblem::new(vec![2.0]);
        p.push_inequality(&[1.0], -1.0);
        p.push_inequality(&[-1.0], -1.0);
        let r = solve_qp(&p, &QpSettings::default());
        assert_eq!(r.status, SolveStatus::Infeasible, "{r:?}");
        assert!(r.infeasibility_certificate.unwrap() <= 1e-8);
    }

    #[test]
    fn mixed_constraints() {
        // min (x-3)^2 + (y-2)^2 + z^2  s.t. x + y <= 3, x - z = 1, y >= 0
        // KKT by hand: x = 5/3, y = 4/3, z = 2/3, multiplier of x + y <= 3 is 4/3
        let mut p = QpProblem::new(vec![2.0, 2.0, 2.0]);
        p.q = vec![-6.0, -4.0, 0.0];
        p.push_inequality(&[1.0, 1.0, 0.0], 3.0);
        p.push_equality(&[1.0, 0.0, -1.0], 1.0);
        p.lower[1] = 0.0;
        let r = solve_qp(&p, &QpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        let want = [5.0 / 3.0, 4.0 / 3.0, 2.0 / 3.0];
        for (a, b) in r.theta.iter().zip(want) {
            assert!((a - b).abs() < 1e-8, "{:?}", r.theta);
        }
        assert!((r.ineq_multipliers[0] - 4.0 / 3.0).abs() < 1e-7);
    }
}
