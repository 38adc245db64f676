use physreg_core::{predict, PredictConfig, RdsParams, Sample, Snapshot, SpatioTemporalPoint};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

/// Many thin snapshots at distinct times with scattered positions, so that
/// the neighbours of a query are in general position in space-time.
fn scattered(f: impl Fn(f64, f64, f64) -> f64, shift: [f64; 2]) -> Vec<Snapshot> {
    let mut rng = StdRng::seed_from_u64(7);
    (0..40)
        .map(|k| {
            let t = 0.0125 * k as f64;
            let samples = (0..8)
                .map(|_| {
                    let (a, b) = (rng.gen_range(0.0..2.5), rng.gen_range(0.0..2.5));
                    Sample::new(shift[0] + a, shift[1] + b, t, f(a, b, t))
                })
                .collect();
            Snapshot::new(k, t, samples).unwrap()
        })
        .collect()
}

fn bump(p1: f64, p2: f64, t: f64) -> f64 {
    20.0 * (-((p1 - 1.3).powi(2) + (p2 - 1.1).powi(2)) / 2.0).exp() * (1.0 + 0.3 * t) + 5.0
}

fn quadratic(p1: f64, p2: f64, t: f64) -> f64 {
    2.0 * p1 - p2 + 0.5 * t + 4.0 + 0.3 * p1 * p2 - 0.2 * t * t + 0.4 * p2 * p2 + 0.7 * p1 * t
}

const QUERIES: [(f64, f64, f64); 4] = [(1.1, 1.3, 0.15), (0.5, 2.0, 0.25), (1.9, 0.7, 0.05), (1.25, 1.25, 0.2)];

fn at(q: (f64, f64, f64)) -> SpatioTemporalPoint {
    SpatioTemporalPoint::new(q.0, q.1, q.2)
}

#[test]
fn quadratic_field_with_many_neighbours() {
    let data = scattered(quadratic, [0.0, 0.0]);
    let mut cfg = PredictConfig { physics: false, ..Default::default() };
    cfg.neighbors.k = 24;
    for q in QUERIES {
        let r = predict(&at(q), &data, &RdsParams::default(), &cfg).unwrap();
        assert!(!r.degraded, "{:?}", r.report.status);
        let truth = quadratic(q.0, q.1, q.2);
        // the Taylor rows alone do not pin the state, the norm picks it
        assert!((r.u_prime - truth).abs() <= 1e-4 * truth.abs(), "{} vs {truth}", r.u_prime);
        let g = r.field_vars_query.g;
        let want = [2.0 + 0.3 * q.1 + 0.7 * q.2, -1.0 + 0.3 * q.0 + 0.8 * q.1, 0.5 - 0.4 * q.2 + 0.7 * q.0];
        // the time derivative is the least constrained near the first snapshot
        for ((a, b), tol) in g.iter().zip(want).zip([1e-2, 1e-2, 1e-1]) {
            assert!((a - b).abs() <= tol, "{g:?} vs {want:?}");
        }
        // a remainder-free field needs almost no slack
        assert!(r.slack_summary.0 <= 1e-4 && r.slack_summary.1 <= 1e-4, "{:?}", r.slack_summary);
    }
}

#[test]
fn constant_field_is_shrunk_slightly_towards_zero() {
    let data = scattered(|_, _, _| -7.5, [0.0, 0.0]);
    let cfg = PredictConfig { physics: false, ..Default::default() };
    for q in QUERIES {
        let r = predict(&at(q), &data, &RdsParams::default(), &cfg).unwrap();
        assert!(!r.degraded);
        assert!(r.u_prime >= -7.5 && r.u_prime <= -7.5 * (1.0 - 2e-3), "{}", r.u_prime);
    }
}

#[test]
fn taylor_regression_is_odd_and_homogeneous() {
    let cfg = PredictConfig { physics: false, ..Default::default() };
    let base = scattered(bump, [0.0, 0.0]);
    for c in [-1.0, 0.25, 3.0, 1e-19] {
        let scaled = scattered(|a, b, t| c * bump(a, b, t), [0.0, 0.0]);
        for q in QUERIES {
            let r0 = predict(&at(q), &base, &RdsParams::default(), &cfg).unwrap();
            let r1 = predict(&at(q), &scaled, &RdsParams::default(), &cfg).unwrap();
            assert!(!r0.degraded && !r1.degraded);
            let want = c * r0.u_prime;
            assert!((r1.u_prime - want).abs() <= 1e-6 * want.abs(), "c = {c}: {} vs {want}", r1.u_prime);
        }
    }
}

#[test]
fn translating_the_domain_moves_nothing() {
    let pde = RdsParams::default();
    let cfg = PredictConfig::default();
    let base = scattered(bump, [0.0, 0.0]);
    let shift = [3.0, -2.0];
    let moved = scattered(bump, shift);
    for q in QUERIES {
        let r0 = predict(&at(q), &base, &pde, &cfg).unwrap();
        let r1 = predict(&at((q.0 + shift[0], q.1 + shift[1], q.2)), &moved, &pde, &cfg).unwrap();
        assert!(!r0.degraded && !r1.degraded);
        assert_eq!(r0.neighbor_ids, r1.neighbor_ids);
        assert!((r0.u_prime - r1.u_prime).abs() <= 1e-7 * r0.u_prime.abs(), "{} vs {}", r0.u_prime, r1.u_prime);
    }
}

#[test]
fn vanishing_states_keep_the_solver_healthy() {
    // a decayed corner of a simulation: the values sit far below every tolerance
    let pde = RdsParams::default();
    let tiny = scattered(|a, b, t| 1e-19 * bump(a, b, t), [0.0, 0.0]);
    let base = scattered(bump, [0.0, 0.0]);
    for q in QUERIES {
        let r = predict(&at(q), &tiny, &pde, &PredictConfig::default()).unwrap();
        assert!(!r.degraded, "{:?}", r.report.status);
        let r0 = predict(&at(q), &base, &RdsParams { beta: 0.0, ..pde }, &PredictConfig::default()).unwrap();
        // at this size the quadratic reaction term is invisible, so the
        // answer is the scaled solution of the linear problem
        assert!((r.u_prime - 1e-19 * r0.u_prime).abs() <= 1e-6 * 1e-19 * r0.u_prime.abs(), "{} vs {}", r.u_prime, r0.u_prime);
    }
}
