use physreg_core::qp::solve_qp_from;
use physreg_core::sqp::base_problem;
use physreg_core::{assemble, solve_dcbr, solve_qp, AxisScaling, QpSettings, RdsParams, Sample, SpatioTemporalPoint, SqpSettings};
use physreg_core::types::ThetaLayout;
use proptest::prelude::*;

/// Smooth stand-in for an RDS state: a broad bump plus a tilt.
fn field(p1: f64, p2: f64, t: f64) -> f64 {
    30.0 * (-((p1 - 1.0).powi(2) + (p2 - 0.5).powi(2)) / 3.0).exp() * (1.0 + 0.4 * t) + 2.0 * p1
}

fn neighbours(offsets: &[(f64, f64, f64)], q: SpatioTemporalPoint) -> Vec<Sample> {
    offsets
        .iter()
        .map(|(a, b, c)| {
            let (p1, p2, t) = (q.p1 + a, q.p2 + b, q.t + c);
            Sample::new(p1, p2, t, field(p1, p2, t))
        })
        .collect()
}

fn layout_strategy() -> impl Strategy<Value = Vec<(f64, f64, f64)>> {
    proptest::collection::vec((-0.6..0.6f64, -0.6..0.6f64, prop_oneof![Just(-0.1), Just(0.0), Just(0.1)]), 10)
}

fn init(layout: ThetaLayout, u0: f64) -> Vec<f64> {
    let mut th = vec![0.0; layout.dim()];
    th[0] = u0;
    for j in layout.slack_indices() {
        th[j] = 1e-3;
    }
    th
}

fn distinct(offsets: &[(f64, f64, f64)]) -> bool {
    offsets.iter().enumerate().all(|(i, a)| {
        offsets[..i].iter().all(|b| (a.0 - b.0).abs() + (a.1 - b.1).abs() + (a.2 - b.2).abs() > 1e-3)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn neighbour_order_does_not_change_u_prime(offsets in layout_strategy(), rot in 1usize..9) {
        prop_assume!(distinct(&offsets));
        let q = SpatioTemporalPoint::new(0.8, 0.4, 0.5);
        let s = neighbours(&offsets, q);
        let mut permuted = s.clone();
        permuted.rotate_left(rot);
        permuted.swap(0, 3);
        let pde = RdsParams::default();
        let cfg = SqpSettings::default();
        let solve = |samples: &[Sample]| {
            let sys = assemble(&q, samples, &AxisScaling::IDENTITY).unwrap();
            solve_dcbr(&sys, Some(&pde), samples, &init(sys.layout, 20.0), &cfg)
        };
        let (a, b) = (solve(&s), solve(&permuted));
        prop_assert!(a.is_optimal() && b.is_optimal());
        prop_assert!((a.theta[0] - b.theta[0]).abs() <= 1e-8 * (1.0 + a.theta[0].abs()), "{} vs {}", a.theta[0], b.theta[0]);
    }

    #[test]
    fn restarting_the_qp_lands_on_the_same_point(offsets in layout_strategy(), shift in -5.0..5.0f64) {
        prop_assume!(distinct(&offsets));
        let q = SpatioTemporalPoint::new(0.8, 0.4, 0.5);
        let s = neighbours(&offsets, q);
        let sys = assemble(&q, &s, &AxisScaling::IDENTITY).unwrap();
        let prob = base_problem(&sys, Some(&RdsParams::default()), &s, 1e-9);
        let settings = QpSettings::default();
        let a = solve_qp(&prob, &settings);
        let start: Vec<f64> = (0..prob.n).map(|j| shift * ((j % 7) as f64 - 3.0)).collect();
        let b = solve_qp_from(&prob, &settings, Some(&start));
        prop_assert!(a.is_optimal() && b.is_optimal(), "{:?} {:?}", a.status, b.status);
        // weakly determined curvature entries may wander within the tolerance;
        // the prediction and the optimal value may not
        prop_assert!((a.theta[0] - b.theta[0]).abs() <= 1e-6 * (1.0 + a.theta[0].abs()), "{} vs {}", a.theta[0], b.theta[0]);
        prop_assert!((a.objective - b.objective).abs() <= 1e-6 * (1.0 + a.objective.abs()));
    }

    #[test]
    fn accepted_outer_steps_never_raise_the_merit(offsets in layout_strategy()) {
        prop_assume!(distinct(&offsets));
        let q = SpatioTemporalPoint::new(0.8, 0.4, 0.5);
        let s = neighbours(&offsets, q);
        let sys = assemble(&q, &s, &AxisScaling::IDENTITY).unwrap();
        let r = solve_dcbr(&sys, Some(&RdsParams::default()), &s, &init(sys.layout, 0.0), &SqpSettings::default());
        prop_assert!(r.is_optimal(), "{:?}", r.status);
        for (before, after) in &r.merit_history {
            // merit values are compared up to the inner tolerance
            prop_assert!(*after <= *before * (1.0 + 1e-8) + 1e-8);
        }
    }
}

#[test]
fn optimal_reports_meet_the_tolerance() {
    let q = SpatioTemporalPoint::new(0.3, -0.2, 0.4);
    let offsets: Vec<(f64, f64, f64)> = (0..12)
        .map(|i| {
            let a = i as f64 * 2.399;
            (0.5 * a.cos(), 0.5 * a.sin(), 0.1 * ((i % 3) as f64 - 1.0))
        })
        .collect();
    let s = neighbours(&offsets, q);
    let sys = assemble(&q, &s, &AxisScaling::IDENTITY).unwrap();
    let cfg = SqpSettings::default();
    let r = solve_dcbr(&sys, Some(&RdsParams::default()), &s, &init(sys.layout, 10.0), &cfg);
    assert!(r.is_optimal());
    assert!(r.kkt_max() <= cfg.qp.tol);
    assert!(r.outer_iterations <= cfg.max_outer);
}
