//! Snapshot error metric and per-snapshot error curves.

use alloc::vec::Vec;

use crate::types::Snapshot;
use crate::{Error, Result};

/// Denominator guard of the relative error.
pub const L2_GUARD: f64 = 1e-6;

/// `sqrt(sum (pred - truth)^2 / (sum truth^2 + 1e-6))`.
///
/// Both snapshots must list the same nodes in the same order; the
/// denominator uses the truth only, so the metric is not symmetric.
pub fn l2_relative_error(pred: &Snapshot, truth: &Snapshot) -> Result<f64> {
    if pred.samples.len() != truth.samples.len() {
        return Err(Error::NodeSetMismatch);
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (a, b) in pred.samples.iter().zip(&truth.samples) {
        if a.point != b.point {
            return Err(Error::NodeSetMismatch);
        }
        let d = a.u - b.u;
        num += d * d;
        den += b.u * b.u;
    }
    Ok(libm::sqrt(num / (den + L2_GUARD)))
}

/// One point of an error curve.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CurvePoint {
    pub k_prime: usize,
    pub t: f64,
    pub error: f64,
}

/// Per-snapshot relative errors, ordered by `k_prime`.
#[derive(Debug, Clone, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ErrorCurve {
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    pub fn push(&mut self, k_prime: usize, t: f64, error: f64) {
        debug_assert!(error >= 0.0);
        self.points.push(CurvePoint { k_prime, t, error });
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn errors(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.error)
    }

    pub fn get(&self, k_prime: usize) -> Option<f64> {
        self.points.iter().find(|p| p.k_prime == k_prime).map(|p| p.error)
    }

    /// Median error; `NaN` for an empty curve.
    pub fn median(&self) -> f64 {
        median(self.errors().collect())
    }

    pub fn mean(&self) -> f64 {
        if self.is_empty() {
            return f64::NAN;
        }
        self.errors().sum::<f64>() / self.len() as f64
    }
}

/// Median of the values (average of the two middle entries for even length).
pub fn median(mut v: Vec<f64>) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::Sample;
    use alloc::vec;

    fn snap(values: &[f64]) -> Snapshot {
        let samples = values.iter().enumerate().map(|(i, &u)| Sample::new(i as f64, 0.0, 0.0, u)).collect();
        Snapshot::new(0, 0.0, samples).unwrap()
    }

    #[test]
    fn identical_is_zero() {
        let s = snap(&[1.0, -2.0, 3.5]);
        assert_eq!(l2_relative_error(&s, &s).unwrap(), 0.0);
    }

    #[test]
    fn zero_truth_uses_guard() {
        let c = 0.3;
        let n = 7;
        let e = l2_relative_error(&snap(&vec![c; n]), &snap(&vec![0.0; n])).unwrap();
        let want = libm::sqrt(n as f64 * c * c / 1e-6);
        assert!((e - want).abs() <= 1e-12 * want);
    }

    #[test]
    fn hand_vector() {
        let e = l2_relative_error(&snap(&[3.0, 5.0]), &snap(&[3.0, 4.0])).unwrap();
        assert!((e - libm::sqrt(1.0 / 25.000001)).abs() < 1e-15);
        // not symmetric
        let r = l2_relative_error(&snap(&[3.0, 4.0]), &snap(&[3.0, 5.0])).unwrap();
        assert!((r - libm::sqrt(1.0 / 34.000001)).abs() < 1e-15);
    }

    #[test]
    fn mismatched_nodes() {
        assert_eq!(l2_relative_error(&snap(&[1.0]), &snap(&[1.0, 2.0])), Err(Error::NodeSetMismatch));
        let mut a = snap(&[1.0, 2.0]);
        a.samples[1].point.p2 = 0.5;
        assert_eq!(l2_relative_error(&a, &snap(&[1.0, 2.0])), Err(Error::NodeSetMismatch));
    }

    #[test]
    fn curve_median() {
        let mut c = ErrorCurve::default();
        for (k, e) in [0.3, 0.1, 0.2, 0.4].into_iter().enumerate() {
            c.push(k + 1, 0.1 * (k + 1) as f64, e);
        }
        assert!((c.median() - 0.25).abs() < 1e-15);
        assert_eq!(c.get(3), Some(0.2));
    }
}
