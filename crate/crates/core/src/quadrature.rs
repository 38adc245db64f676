//! Three-point Gauss–Lobatto rule on `[0, 1]` and the Taylor coefficients it
//! induces.
//!
//! The integral remainder of a second-order expansion,
//! `int_0^1 (1 - s) xi^T H(x + s xi) xi ds`, is evaluated with nodes
//! `{0, 1/2, 1}` and weights `{1/6, 4/6, 1/6}`. The same rule applied to the
//! gradient relation `g' - g = int_0^1 H(x + s xi) xi ds` eliminates the
//! unknown midpoint Hessian, leaving only quantities at the two endpoints.

/// Nodes of the rule on `[0, 1]`.
pub const NODES: [f64; 3] = [0.0, 0.5, 1.0];
/// Weights of the rule on `[0, 1]`.
pub const WEIGHTS: [f64; 3] = [1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0];

/// `sum_k w_k f(s_k)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F) -> f64 {
    NODES.iter().zip(WEIGHTS.iter()).map(|(&s, &w)| w * f(s)).sum()
}

/// `int_0^1 (1 - s) q(s) ds` evaluated with the rule.
pub fn remainder_integral<F: FnMut(f64) -> f64>(mut q: F) -> f64 {
    integrate(|s| (1.0 - s) * q(s))
}

/// Coefficients of the quadrature-based expansion
///
/// `u_to = u_from + c_g_from * xi.g_from + c_g_to * xi.g_to
///        + c_h_from * xi^T H_from xi + c_h_to * xi^T H_to xi + remainder`.
///
/// For the three-point rule these are `1/2, 1/2, 1/12, -1/12`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionCoefficients {
    pub g_from: f64,
    pub g_to: f64,
    pub h_from: f64,
    pub h_to: f64,
}

impl ExpansionCoefficients {
    pub fn from_rule(nodes: [f64; 3], weights: [f64; 3]) -> Self {
        // quadratic-form weights of the Taylor remainder
        let a = [
            weights[0] * (1.0 - nodes[0]),
            weights[1] * (1.0 - nodes[1]),
            weights[2] * (1.0 - nodes[2]),
        ];
        // midpoint Hessian eliminated through the gradient relation
        let m = a[1] / weights[1];
        Self {
            g_from: 1.0 - m,
            g_to: m,
            h_from: a[0] - m * weights[0],
            h_to: a[2] - m * weights[2],
        }
    }

    pub fn lobatto3() -> Self {
        Self::from_rule(NODES, WEIGHTS)
    }
}
