//! Small dense kernels used by the QP solver.

use alloc::vec;
use alloc::vec::Vec;

/// In-place Cholesky factorisation of a symmetric positive definite
/// row-major `n x n` matrix; the lower triangle is overwritten with `L`.
///
/// Pivots at or below `floor` are replaced by a huge value, which zeroes the
/// matching solution component instead of letting it blow up (the usual
/// treatment of nearly singular interior-point normal matrices). Returns the
/// number of replaced pivots, or `None` when a pivot is not finite.
const HUGE_PIVOT: f64 = 1e128;

pub fn cholesky_in_place(a: &mut [f64], n: usize, floor: f64) -> Option<usize> {
    debug_assert_eq!(a.len(), n * n);
    let mut lifted = 0;
    for i in 0..n {
        let (done, rest) = a.split_at_mut(i * n);
        let row_i = &mut rest[..n];
        for j in 0..i {
            let row_j = &done[j * n..j * n + j + 1];
            let s = row_i[j] - dot(&row_i[..j], &row_j[..j]);
            row_i[j] = s / row_j[j];
        }
        let mut d = row_i[i] - dot(&row_i[..i], &row_i[..i]);
        if !d.is_finite() {
            return None;
        }
        if d <= floor {
            d = HUGE_PIVOT;
            lifted += 1;
        }
        row_i[i] = libm::sqrt(d);
    }
    Some(lifted)
}

/// Solves `L L^T x = b` in place given the factor from [`cholesky_in_place`].
pub fn cholesky_solve(l: &[f64], n: usize, b: &mut [f64]) {
    forward_solve(l, n, b, 0);
    backward_solve(l, n, b);
}

/// `b <- L^-1 b`, where the caller guarantees `b[..first] == 0`.
pub fn forward_solve(l: &[f64], n: usize, b: &mut [f64], first: usize) {
    for i in first..n {
        let s = dot(&l[i * n + first..i * n + i], &b[first..i]);
        b[i] = (b[i] - s) / l[i * n + i];
    }
}

/// `b <- L^-T b`, walking the rows of `L`.
pub fn backward_solve(l: &[f64], n: usize, b: &mut [f64]) {
    for i in (0..n).rev() {
        b[i] /= l[i * n + i];
        let bi = b[i];
        for (bk, lk) in b[..i].iter_mut().zip(&l[i * n..i * n + i]) {
            *bk -= lk * bi;
        }
    }
}

/// Dense row-major matrix-vector product `y = A x` for `A` of shape `m x n`.
pub fn mat_vec(a: &[f64], m: usize, n: usize, x: &[f64]) -> Vec<f64> {
    (0..m).map(|i| dot(&a[i * n..(i + 1) * n], x)).collect()
}

/// `y = A^T x`.
pub fn mat_t_vec(a: &[f64], m: usize, n: usize, x: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..m {
        let xi = x[i];
        if xi == 0.0 {
            continue;
        }
        for (yj, aij) in y.iter_mut().zip(&a[i * n..(i + 1) * n]) {
            *yj += aij * xi;
        }
    }
    y
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len());
    let (a, b) = (&a[..n], &b[..n]);
    // four partial sums so the loop vectorises
    let mut acc = [0.0; 4];
    let (ca, cb) = (a.chunks_exact(4), b.chunks_exact(4));
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..4 {
            acc[l] += x[l] * y[l];
        }
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0, |m, v| m.max(v.abs()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_spd_system() {
        // A = M M^T + I
        let m = [1.0, 2.0, 0.5, -1.0, 0.0, 3.0, 2.0, 1.0, 1.0];
        let n = 3;
        let mut a = vec![0.0; 9];
        for i in 0..n {
            for j in 0..n {
                a[i * n + j] = (0..n).map(|k| m[i * n + k] * m[j * n + k]).sum::<f64>() + if i == j { 1.0 } else { 0.0 };
            }
        }
        let x_true = [1.0, -2.0, 0.25];
        let mut b = mat_vec(&a, n, n, &x_true);
        let mut l = a.clone();
        assert_eq!(cholesky_in_place(&mut l, n, 1e-300), Some(0));
        cholesky_solve(&l, n, &mut b);
        for (x, t) in b.iter().zip(&x_true) {
            assert!((x - t).abs() < 1e-12);
        }
    }

    #[test]
    fn lifts_singular_pivots() {
        let mut a = vec![1.0, 1.0, 1.0, 1.0];
        assert_eq!(cholesky_in_place(&mut a, 2, 1e-12), Some(1));
    }
}
