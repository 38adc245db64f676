//! The full per-query program: slack-minimising objective, Taylor
//! inequalities, linear PDE rows at the samples and the (possibly nonlinear)
//! PDE residual at the query.
//!
//! The query residual is linearised at the current iterate and appended as an
//! equality row; the resulting convex QP is solved and the step damped by
//! backtracking on `objective + penalty * |residual|`. The first step is
//! always taken in full because the initial guess need not satisfy the
//! linear constraints.

use alloc::vec;
use alloc::vec::Vec;

use crate::linalg::dot;
use crate::physics::PdeModel;
use crate::qp::{solve_qp, QpProblem, QpSettings, SolveReport, SolveStatus};
use crate::taylor::ConstraintSystem;
use crate::types::{Sample, HALF_VEC_PAIRS, H_OFFSET, OMEGA_LEN};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SqpSettings {
    pub qp: QpSettings,
    /// Weight of the `theta^T theta` regulariser.
    pub rho: f64,
    pub max_outer: usize,
    pub step_tol: f64,
    pub residual_tol: f64,
}

impl Default for SqpSettings {
    fn default() -> Self {
        Self { qp: QpSettings::default(), rho: 1e-9, max_outer: 30, step_tol: 1e-9, residual_tol: 1e-9 }
    }
}

/// Multiplies each `omega` entry's coefficient by the chain-rule factor that
/// maps scaled-coordinate derivatives to physical ones.
fn omega_factors(s: [f64; 3]) -> [f64; OMEGA_LEN] {
    let mut f = [0.0; OMEGA_LEN];
    f[..3].copy_from_slice(&s);
    for (slot, (a, b)) in HALF_VEC_PAIRS.iter().enumerate() {
        f[H_OFFSET + slot] = s[*a] * s[*b];
    }
    f
}

/// Convex part of the program: objective, inequalities, slack bounds and the
/// sample PDE equalities.
///
/// The objective is divided by `rho`, which leaves the minimiser unchanged
/// but gives the state and derivative entries unit curvature, so an absolute
/// stationarity tolerance bounds their error directly. Multipliers and KKT
/// residuals in a report refer to this normalised objective.
pub fn base_problem(system: &ConstraintSystem, pde: Option<&dyn PdeModel>, samples: &[Sample], rho: f64) -> QpProblem {
    let layout = system.layout;
    let n = layout.dim();
    let mut p_diag = vec![2.0; n];
    for j in layout.slack_indices() {
        p_diag[j] = 2.0 * (1.0 + rho) / rho;
    }
    let mut prob = QpProblem::new(p_diag);
    prob.a = system.a.clone();
    prob.b = system.b.clone();
    for j in layout.slack_indices() {
        prob.lower[j] = 0.0;
    }
    if let Some(pde) = pde {
        let factors = omega_factors(system.scaling.factors());
        let mut row = vec![0.0; n];
        for (i, s) in samples.iter().enumerate() {
            let (coeff, rhs) = pde.sample_equality(s.u);
            row.iter_mut().for_each(|v| *v = 0.0);
            let start = layout.neighbor_kappa(i).start;
            for j in 0..OMEGA_LEN {
                row[start + j] = coeff[j] * factors[j];
            }
            prob.push_equality(&row, rhs);
        }
    }
    prob
}

/// Query residual and its gradient over `theta`.
fn query_residual(pde: &dyn PdeModel, system: &ConstraintSystem, theta: &[f64]) -> (f64, Vec<f64>) {
    let layout = system.layout;
    let factors = omega_factors(system.scaling.factors());
    let start = layout.query_kappa().start;
    let omega: [f64; OMEGA_LEN] = core::array::from_fn(|j| theta[start + j] * factors[j]);
    let (r, g) = pde.query_residual(theta[layout.u_prime()], &omega);
    let mut grad = vec![0.0; layout.dim()];
    grad[layout.u_prime()] = g[0];
    for j in 0..OMEGA_LEN {
        grad[start + j] = g[1 + j] * factors[j];
    }
    (r, grad)
}

/// Solves the per-query program starting from `init`.
///
/// With `pde = None` this is the pure Taylor regression: one QP. Otherwise
/// the sample rows are fixed equalities and the query residual is handled by
/// successive linearisation.
pub fn solve_dcbr(
    system: &ConstraintSystem,
    pde: Option<&dyn PdeModel>,
    samples: &[Sample],
    init: &[f64],
    cfg: &SqpSettings,
) -> SolveReport {
    let base = base_problem(system, pde, samples, cfg.rho);
    let Some(pde) = pde else {
        let mut r = solve_qp(&base, &cfg.qp);
        r.outer_iterations = 1;
        r.objective *= cfg.rho;
        return r;
    };
    let n = base.n;
    let mut theta = init.to_vec();
    let mut penalty: f64 = 0.0;
    let mut inner_total = 0;
    let mut merit_history = Vec::new();
    let mut last: Option<SolveReport> = None;
    let mut inner_failure = None;
    let mut converged = false;
    let mut outer = 0;

    while outer < cfg.max_outer {
        outer += 1;
        let (r, grad) = query_residual(pde, system, &theta);
        let mut prob = base.clone();
        prob.push_equality(&grad, dot(&grad, &theta) - r);
        let mut rep = solve_qp(&prob, &cfg.qp);
        inner_total += rep.iterations;
        if !rep.is_optimal() {
            inner_failure = Some(rep.status);
            if outer == 1 {
                theta = rep.theta.clone();
            }
            last = Some(rep);
            break;
        }
        let dir: Vec<f64> = rep.theta.iter().zip(&theta).map(|(a, b)| a - b).collect();
        let nu_lin = *rep.eq_multipliers.last().unwrap_or(&0.0);
        penalty = penalty.max(2.0 * nu_lin.abs());

        let previous = theta.clone();
        if outer == 1 {
            theta.copy_from_slice(&rep.theta);
        } else {
            let merit = |x: &[f64]| base.objective(x) + penalty * query_residual(pde, system, x).0.abs();
            let m0 = merit(&theta);
            // the QP solutions are only accurate to the inner tolerance
            let slack = cfg.qp.tol * (1.0 + m0.abs());
            let mut accepted = None;
            let m_full = merit(&rep.theta);
            if m_full <= m0 + slack {
                accepted = Some((rep.theta.clone(), m_full));
            } else {
                // second-order correction: shift the query row by the
                // residual the full step leaves behind
                let r_full = query_residual(pde, system, &rep.theta).0;
                let mut soc = base.clone();
                soc.push_equality(&grad, dot(&grad, &theta) - r - r_full);
                let srep = solve_qp(&soc, &cfg.qp);
                inner_total += srep.iterations;
                if srep.is_optimal() {
                    let ms = merit(&srep.theta);
                    if ms <= m0 + slack {
                        accepted = Some((srep.theta.clone(), ms));
                        rep = srep;
                    }
                }
            }
            let mut gamma = 1.0;
            for _ in 0..40 {
                if accepted.is_some() {
                    break;
                }
                gamma *= 0.5;
                let trial: Vec<f64> = theta.iter().zip(&dir).map(|(t, d)| t + gamma * d).collect();
                let m1 = merit(&trial);
                if m1 <= m0 + slack {
                    accepted = Some((trial, m1));
                }
            }
            let Some((trial, m1)) = accepted else {
                // no merit decrease available at working precision
                last = Some(rep);
                converged = true;
                break;
            };
            merit_history.push((m0, m1));
            theta = trial;
        }
        last = Some(rep);
        if pde.is_affine() {
            converged = true;
            break;
        }
        let step = theta.iter().zip(&previous).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        if step <= cfg.step_tol {
            converged = true;
            break;
        }
        let (r_new, _) = query_residual(pde, system, &theta);
        // a damped step leaves theta off the QP solution, so the residual
        // test alone is not enough
        if r_new.abs() <= cfg.residual_tol
            && nlp_kkt(&base, pde, system, &theta, last.as_ref().unwrap()).iter().all(|v| *v <= cfg.qp.tol)
        {
            converged = true;
            break;
        }
    }

    let rep = last.expect("at least one outer iteration runs");
    let kkt = nlp_kkt(&base, pde, system, &theta, &rep);
    let status = match inner_failure {
        Some(s) => s,
        None if converged && kkt.iter().all(|v| *v <= cfg.qp.tol) => SolveStatus::Optimal,
        None => SolveStatus::MaxIter,
    };
    debug_assert_eq!(theta.len(), n);
    SolveReport {
        objective: cfg.rho * base.objective(&theta),
        kkt_stationarity: kkt[0],
        kkt_feasibility: kkt[1],
        kkt_complementarity: kkt[2],
        iterations: inner_total,
        outer_iterations: outer,
        status,
        ineq_multipliers: rep.ineq_multipliers,
        eq_multipliers: rep.eq_multipliers,
        bound_multipliers: rep.bound_multipliers,
        infeasibility_certificate: rep.infeasibility_certificate,
        merit_history,
        theta,
    }
}

/// KKT residuals of the nonlinear program at `theta`, using the multipliers
/// of the last QP with the residual gradient re-evaluated at `theta`.
fn nlp_kkt(base: &QpProblem, pde: &dyn PdeModel, system: &ConstraintSystem, theta: &[f64], rep: &SolveReport) -> [f64; 3] {
    let (r, grad) = query_residual(pde, system, theta);
    let mut prob = base.clone();
    // the row grad . x = grad . theta - r has residual exactly r at theta
    prob.push_equality(&grad, dot(&grad, theta) - r);
    let mut eq = rep.eq_multipliers.clone();
    eq.resize(prob.equality_count(), 0.0);
    prob.kkt_residuals(theta, &rep.ineq_multipliers, &eq, &rep.bound_multipliers)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::physics::{LinearPde, RdsParams};
    use crate::taylor::assemble;
    use crate::types::{AxisScaling, SpatioTemporalPoint, ThetaLayout};

    fn ring(center: SpatioTemporalPoint, f: impl Fn(f64, f64, f64) -> f64) -> Vec<Sample> {
        let offs = [
            (0.3, 0.1, 0.0),
            (-0.2, 0.25, 0.0),
            (0.05, -0.3, 0.1),
            (-0.25, -0.15, -0.1),
            (0.2, 0.2, -0.1),
            (-0.1, 0.05, 0.1),
            (0.15, -0.1, -0.2),
            (0.0, 0.3, 0.2),
        ];
        offs.iter()
            .map(|(a, b, c)| {
                let (p1, p2, t) = (center.p1 + a, center.p2 + b, center.t + c);
                Sample::new(p1, p2, t, f(p1, p2, t))
            })
            .collect()
    }

    fn init(layout: ThetaLayout, u0: f64) -> Vec<f64> {
        let mut th = vec![0.0; layout.dim()];
        th[0] = u0;
        for j in layout.slack_indices() {
            th[j] = 1e-3;
        }
        th
    }

    #[test]
    fn linear_pde_needs_one_outer_iteration() {
        let q = SpatioTemporalPoint::new(1.0, 1.0, 0.5);
        let s = ring(q, |a, b, t| 1.0 + a - 0.5 * b + 0.2 * t);
        let sys = assemble(&q, &s, &AxisScaling::IDENTITY).unwrap();
        let pde = RdsParams { beta: 0.0, alpha: 0.0, ..RdsParams::default() };
        let cfg = SqpSettings::default();
        let r = solve_dcbr(&sys, Some(&pde), &s, &init(sys.layout, 1.0), &cfg);
        assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
        assert_eq!(r.outer_iterations, 1);
        // identical to a single QP with the (exact) linearised row
        let mut prob = base_problem(&sys, Some(&pde), &s, cfg.rho);
        let (res, grad) = query_residual(&pde, &sys, &init(sys.layout, 1.0));
        prob.push_equality(&grad, dot(&grad, &init(sys.layout, 1.0)) - res);
        let single = solve_qp(&prob, &cfg.qp);
        assert_eq!(single.theta, r.theta);
    }

    #[test]
    fn coincident_query_returns_sample_value() {
        let q = SpatioTemporalPoint::new(2.0, 3.0, 0.4);
        let f = |a: f64, b: f64, t: f64| 40.0 + 10.0 * libm::sin(a) * libm::cos(b) + 5.0 * t;
        let mut s = ring(q, f);
        s[3] = Sample::new(q.p1, q.p2, q.t, f(q.p1, q.p2, q.t));
        let sys = assemble(&q, &s, &AxisScaling::IDENTITY).unwrap();
        let pde = RdsParams::default();
        let r = solve_dcbr(&sys, Some(&pde), &s, &init(sys.layout, 30.0), &SqpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal, "{r:?}");
        assert!((r.theta[0] - s[3].u).abs() < 1e-8, "{} vs {}", r.theta[0], s[3].u);
        for (before, after) in &r.merit_history {
            assert!(after <= before);
        }
    }

    #[test]
    fn heat_equation_rows_are_enforced() {
        // u = 1 + p1^2 + p2^2 + 4 nu t solves u_t = nu (u_11 + u_22)
        let nu = 0.1;
        let f = |a: f64, b: f64, t: f64| 1.0 + a * a + b * b + 4.0 * nu * t;
        let q = SpatioTemporalPoint::new(0.5, -0.3, 0.7);
        let mut s = ring(q, f);
        for (a, b, c) in [(0.35, -0.2, 0.1), (-0.3, 0.3, 0.15), (0.1, 0.35, -0.25), (-0.2, -0.3, 0.25)] {
            let (p1, p2, t) = (q.p1 + a, q.p2 + b, q.t + c);
            s.push(Sample::new(p1, p2, t, f(p1, p2, t)));
        }
        let sys = assemble(&q, &s, &AxisScaling::IDENTITY).unwrap();
        let pde = LinearPde::heat(nu);
        let r = solve_dcbr(&sys, Some(&pde), &s, &init(sys.layout, 0.0), &SqpSettings::default());
        assert_eq!(r.status, SolveStatus::Optimal);
        assert_eq!(r.outer_iterations, 1);
        let layout = sys.layout;
        for j in 0..=layout.k {
            let st = layout.point_kappa(j).start;
            let res = r.theta[st + 2] - nu * (r.theta[st + 3] + r.theta[st + 4]);
            assert!(res.abs() < 1e-9, "point {j}: {res}");
        }
        // the state never enters the heat rows, so the regulariser leaves a
        // small pull on u'
        let truth = f(q.p1, q.p2, q.t);
        assert!((r.theta[0] - truth).abs() < 2e-3 * truth, "{} vs {truth}", r.theta[0]);
    }
}
