//! PDE constraints on the field variables.
//!
//! At a sample the state is known, so the PDE becomes a linear equality over
//! `omega = (g, h)`. At the query the state is a decision variable and the PDE
//! is a (possibly nonlinear) scalar residual over `(u', omega')`.

use alloc::format;

use crate::types::OMEGA_LEN;
use crate::{Error, Result};

/// A PDE `F(u, g, h) = 0` written over physical (unscaled) derivatives.
pub trait PdeModel: Sync {
    /// Row over `omega` and right-hand side of the equality at a point whose
    /// state `u` is known.
    fn sample_equality(&self, u: f64) -> ([f64; OMEGA_LEN], f64);

    /// Residual at the query and its gradient with respect to `(u', omega')`.
    fn query_residual(&self, u: f64, omega: &[f64; OMEGA_LEN]) -> (f64, [f64; 1 + OMEGA_LEN]);

    /// True when the residual is affine in `(u', omega')`, so a single
    /// linearisation is exact.
    fn is_affine(&self) -> bool;
}

/// `F` rewritten for the state `v = u / scale`.
///
/// Both the sample rows and the query residual are divided by `scale`, so for
/// an affine `F` the rescaled problem is the original one in units of `scale`.
#[derive(Clone, Copy)]
pub struct ScaledPde<'a> {
    pub inner: &'a dyn PdeModel,
    pub scale: f64,
}

impl PdeModel for ScaledPde<'_> {
    fn sample_equality(&self, v: f64) -> ([f64; OMEGA_LEN], f64) {
        let (coeff, rhs) = self.inner.sample_equality(self.scale * v);
        (coeff, rhs / self.scale)
    }

    fn query_residual(&self, v: f64, omega: &[f64; OMEGA_LEN]) -> (f64, [f64; 1 + OMEGA_LEN]) {
        let c = self.scale;
        let mut w = *omega;
        w.iter_mut().for_each(|x| *x *= c);
        let (r, grad) = self.inner.query_residual(c * v, &w);
        (r / c, grad)
    }

    fn is_affine(&self) -> bool {
        self.inner.is_affine()
    }
}

/// Coefficients of `d_t u = nu lap(u) + alpha u - beta u^2 + w . grad(u)`.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RdsParams {
    pub nu: f64,
    pub alpha: f64,
    pub beta: f64,
    pub w: [f64; 2],
}

impl Default for RdsParams {
    fn default() -> Self {
        Self { nu: 0.02, alpha: 1.0, beta: 0.008, w: [0.1, -0.06] }
    }
}

impl RdsParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0 && self.nu.is_finite()) {
            return Err(Error::InvalidConfig(format!("diffusivity must be positive, got {}", self.nu)));
        }
        if ![self.alpha, self.beta, self.w[0], self.w[1]].iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite reaction/advection coefficients {self:?}")));
        }
        Ok(())
    }

    pub fn reaction(&self, u: f64) -> f64 {
        self.alpha * u - self.beta * u * u
    }
}

/// `(g1, g2, g3, h11, h22, h33, h12, h13, h23) . row = alpha u - beta u^2`
/// with row `(-w1, -w2, 1, -nu, -nu, 0, 0, 0, 0)`.
pub fn rds_sample_equality(u: f64, p: &RdsParams) -> ([f64; OMEGA_LEN], f64) {
    (
        [-p.w[0], -p.w[1], 1.0, -p.nu, -p.nu, 0.0, 0.0, 0.0, 0.0],
        p.reaction(u),
    )
}

/// `nu h11 + nu h22 + alpha u - beta u^2 + w1 g1 + w2 g2 - g3` and its
/// gradient over `(u, g1, g2, g3, h11, ..., h23)`.
pub fn rds_query_residual(u: f64, omega: &[f64; OMEGA_LEN], p: &RdsParams) -> (f64, [f64; 1 + OMEGA_LEN]) {
    let [g1, g2, g3, h11, h22, ..] = *omega;
    let r = p.nu * h11 + p.nu * h22 + p.reaction(u) + p.w[0] * g1 + p.w[1] * g2 - g3;
    let grad = [p.alpha - 2.0 * p.beta * u, p.w[0], p.w[1], -1.0, p.nu, p.nu, 0.0, 0.0, 0.0, 0.0];
    (r, grad)
}

impl PdeModel for RdsParams {
    fn sample_equality(&self, u: f64) -> ([f64; OMEGA_LEN], f64) {
        rds_sample_equality(u, self)
    }

    fn query_residual(&self, u: f64, omega: &[f64; OMEGA_LEN]) -> (f64, [f64; 1 + OMEGA_LEN]) {
        rds_query_residual(u, omega, self)
    }

    fn is_affine(&self) -> bool {
        self.beta == 0.0
    }
}

/// Affine PDE `state * u + omega_coeff . omega = source`.
///
/// Covers heat (`d_t u = nu lap u`), pure advection and similar test
/// problems.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearPde {
    pub state: f64,
    pub omega_coeff: [f64; OMEGA_LEN],
    pub source: f64,
}

impl LinearPde {
    /// `d_t u - nu (d_11 u + d_22 u) = 0`.
    pub fn heat(nu: f64) -> Self {
        Self { state: 0.0, omega_coeff: [0.0, 0.0, 1.0, -nu, -nu, 0.0, 0.0, 0.0, 0.0], source: 0.0 }
    }

    /// `d_t u + c1 d_1 u + c2 d_2 u = 0`.
    pub fn advection(c: [f64; 2]) -> Self {
        Self { state: 0.0, omega_coeff: [c[0], c[1], 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], source: 0.0 }
    }
}

impl PdeModel for LinearPde {
    fn sample_equality(&self, u: f64) -> ([f64; OMEGA_LEN], f64) {
        (self.omega_coeff, self.source - self.state * u)
    }

    fn query_residual(&self, u: f64, omega: &[f64; OMEGA_LEN]) -> (f64, [f64; 1 + OMEGA_LEN]) {
        let mut grad = [0.0; 1 + OMEGA_LEN];
        grad[0] = self.state;
        grad[1..].copy_from_slice(&self.omega_coeff);
        let r = self.state * u + self.omega_coeff.iter().zip(omega).map(|(a, b)| a * b).sum::<f64>() - self.source;
        (r, grad)
    }

    fn is_affine(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn rescaled_rows_describe_the_same_field() {
        let p = RdsParams::default();
        let c = 40.0;
        let scaled = ScaledPde { inner: &p, scale: c };
        let (u, omega) = (73.0, [0.4, -1.1, 2.0, 0.3, -0.2, 0.5, 0.1, 0.0, -0.7]);
        let omega_v = omega.map(|x| x / c);
        let (row, rhs) = rds_sample_equality(u, &p);
        let (row_v, rhs_v) = scaled.sample_equality(u / c);
        assert_eq!(row, row_v);
        assert!(((dot(&row, &omega) - rhs) / c - (dot(&row_v, &omega_v) - rhs_v)).abs() < 1e-14);
        let (r, g) = rds_query_residual(u, &omega, &p);
        let (r_v, g_v) = scaled.query_residual(u / c, &omega_v);
        assert!((r / c - r_v).abs() < 1e-14);
        assert_eq!(g[1..], g_v[1..]);
        assert!((g[0] - g_v[0]).abs() < 1e-14);
    }

    #[test]
    fn zero_state_is_homogeneous() {
        let (_, rhs) = rds_sample_equality(0.0, &RdsParams::default());
        assert_eq!(rhs, 0.0);
    }

    #[test]
    fn equilibrium_state_has_zero_rhs() {
        let p = RdsParams::default();
        let (_, rhs) = rds_sample_equality(125.0, &p);
        assert!(rhs.abs() < 1e-12, "{rhs}");
        let (r, _) = rds_query_residual(125.0, &[0.0; 9], &p);
        assert!(r.abs() < 1e-12);
        assert_eq!(rds_query_residual(0.0, &[0.0; 9], &p).0, 0.0);
    }

    #[test]
    fn manufactured_cosine_mode_satisfies_row() {
        // u = exp(sigma t) cos(k p1) with w = 0 solves d_t u = nu u_11 + alpha u - beta u^2 only
        // pointwise, so pick the point and sigma such that it does.
        let p = RdsParams { w: [0.0, 0.0], ..RdsParams::default() };
        let k = 1.3;
        let (p1, t) = (0.4, 0.7);
        let c = libm::cos(k * p1);
        // choose sigma so the PDE holds at (p1, t): sigma u = -nu k^2 u + alpha u - beta u^2
        // with u = e^{sigma t} c, solved by fixed point in sigma
        let mut sigma = 0.5;
        for _ in 0..200 {
            let u = libm::exp(sigma * t) * c;
            sigma = -p.nu * k * k + p.alpha - p.beta * u;
        }
        let u = libm::exp(sigma * t) * c;
        let g = [-k * libm::exp(sigma * t) * libm::sin(k * p1), 0.0, sigma * u];
        let h = [-k * k * u, 0.0, sigma * sigma * u, 0.0, sigma * g[0], 0.0];
        let omega = [g[0], g[1], g[2], h[0], h[1], h[2], h[3], h[4], h[5]];
        let (row, rhs) = rds_sample_equality(u, &p);
        assert!((dot(&row, &omega) - rhs).abs() < 1e-10);
        assert!(rds_query_residual(u, &omega, &p).0.abs() < 1e-10);
    }

    #[test]
    fn gradient_matches_central_differences() {
        use rand::{Rng, SeedableRng};
        let p = RdsParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let u: f64 = rng.gen_range(-50.0..150.0);
            let omega: [f64; 9] = core::array::from_fn(|_| rng.gen_range(-10.0..10.0));
            let (_, grad) = rds_query_residual(u, &omega, &p);
            let step = 1e-6;
            let mut x = [0.0; 10];
            x[0] = u;
            x[1..].copy_from_slice(&omega);
            let f = |x: &[f64; 10]| {
                let mut w = [0.0; 9];
                w.copy_from_slice(&x[1..]);
                rds_query_residual(x[0], &w, &p).0
            };
            for j in 0..10 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += step;
                xm[j] -= step;
                let fd = (f(&xp) - f(&xm)) / (2.0 * step);
                let scale = grad[j].abs().max(1.0);
                assert!((fd - grad[j]).abs() / scale < 1e-6, "component {j}: {fd} vs {}", grad[j]);
            }
        }
    }

    #[test]
    fn sample_row_is_linear_part_of_query_residual() {
        // substituting a known u into the residual: residual = -(row . omega - rhs)
        let p = RdsParams::default();
        for (i, u) in [-3.0, 0.0, 1.5, 42.0, 125.0, 300.0].into_iter().enumerate() {
            let omega: [f64; 9] = core::array::from_fn(|j| (i * 9 + j) as f64 * 0.37 - 5.0);
            let (row, rhs) = rds_sample_equality(u, &p);
            let (r, _) = rds_query_residual(u, &omega, &p);
            assert!((r + (dot(&row, &omega) - rhs)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_beta_is_affine() {
        let p = RdsParams { beta: 0.0, ..RdsParams::default() };
        assert!(p.is_affine());
        assert!(!RdsParams::default().is_affine());
        // second derivative in u is -2 beta
        let d = |u: f64| rds_query_residual(u, &[0.0; 9], &RdsParams::default()).1[0];
        assert!(((d(3.0) - d(1.0)) / 2.0 + 2.0 * 0.008).abs() < 1e-12);
    }

    #[test]
    fn linear_pde_consistency() {
        let heat = LinearPde::heat(0.1);
        let omega = [0.0, 0.0, 0.2, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0];
        let (row, rhs) = heat.sample_equality(5.0);
        assert!((dot(&row, &omega) - rhs).abs() < 1e-15);
        assert!(heat.query_residual(5.0, &omega).0.abs() < 1e-15);
        assert!(RdsParams { nu: 0.0, ..RdsParams::default() }.validate().is_err());
    }
}
