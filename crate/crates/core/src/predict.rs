//! End-to-end pointwise prediction: neighbour selection, constraint
//! assembly, physics rows, solve.
//!
//! There is no fitting stage. Each call reads the data and nothing is cached
//! between calls, so appending snapshots never invalidates anything.

use alloc::vec;
use alloc::vec::Vec;

use crate::neighbors::{NeighborConfig, NeighborSearch, NeighborSelection};
use crate::physics::{PdeModel, ScaledPde};
use crate::qp::SolveReport;
use crate::sqp::{solve_dcbr, SqpSettings};
use crate::taylor::assemble;
use crate::types::{AxisScaling, FieldVars, Sample, Snapshot, SpatioTemporalPoint, ThetaLayout};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PredictConfig {
    pub neighbors: NeighborConfig,
    /// Scaling applied to coordinates inside the Taylor constraints.
    pub scaling: AxisScaling,
    pub solver: SqpSettings,
    /// `false` drops every PDE equality (pure Taylor regression).
    pub physics: bool,
}

impl Default for PredictConfig {
    fn default() -> Self {
        Self {
            neighbors: NeighborConfig::default(),
            scaling: AxisScaling::IDENTITY,
            solver: SqpSettings::default(),
            physics: true,
        }
    }
}

impl PredictConfig {
    pub fn validate(&self) -> Result<()> {
        self.neighbors.validate()?;
        self.scaling.validate()?;
        if !(self.solver.rho > 0.0 && self.solver.qp.tol > 0.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "rho and tolerance must be positive (rho = {}, tol = {})",
                self.solver.rho,
                self.solver.qp.tol
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionResult {
    pub u_prime: f64,
    /// Field variables at the query in physical units.
    pub field_vars_query: FieldVars,
    pub field_vars_neighbors: Vec<FieldVars>,
    /// `(max eps_g, max eps_Q)` over the query and its neighbours.
    pub slack_summary: (f64, f64),
    /// `theta` and `objective` are in physical units; residuals and
    /// multipliers refer to the solve on normalised data.
    pub report: SolveReport,
    pub neighbor_ids: Vec<usize>,
    pub undersized: bool,
    /// Solver did not reach an optimal point; `u_prime` is the IDW fallback.
    pub degraded: bool,
    /// Inverse-distance-weighted estimate used as warm start and fallback.
    pub idw: f64,
}

/// Inverse-distance-squared average; an exact hit returns that sample.
pub fn idw_estimate(sel: &NeighborSelection) -> f64 {
    const GUARD: f64 = 1e-12;
    if let Some(i) = sel.distances.iter().position(|&d| d <= GUARD) {
        return sel.samples[i].u;
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (s, d) in sel.samples.iter().zip(&sel.distances) {
        let w = 1.0 / (d * d);
        num += w * s.u;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Largest sample magnitude, or one when every sample is zero.
pub fn data_scale(samples: &[Sample]) -> f64 {
    let m = samples.iter().fold(0.0f64, |m, s| m.max(s.u.abs()));
    if m > 0.0 && m.is_finite() {
        m
    } else {
        1.0
    }
}

/// Warm start: IDW state, zero derivatives, slacks `1e-3`.
pub fn initial_theta(layout: ThetaLayout, u0: f64) -> Vec<f64> {
    let mut theta = vec![0.0; layout.dim()];
    theta[layout.u_prime()] = u0;
    for j in layout.slack_indices() {
        theta[j] = 1e-3;
    }
    theta
}

pub fn predict(query: &SpatioTemporalPoint, data: &[Snapshot], pde: &dyn PdeModel, cfg: &PredictConfig) -> Result<PredictionResult> {
    let search = NeighborSearch::new(data, &cfg.neighbors);
    predict_with(&search, query, pde, cfg)
}

/// As [`predict`] with a prepared neighbour search (shared across queries).
pub fn predict_with(
    search: &NeighborSearch<'_>,
    query: &SpatioTemporalPoint,
    pde: &dyn PdeModel,
    cfg: &PredictConfig,
) -> Result<PredictionResult> {
    let sel = search.select(query);
    if sel.samples.is_empty() {
        return Err(Error::EmptyNeighbors);
    }
    let idw = idw_estimate(&sel);
    // the solve runs on u / scale so that tolerances and step control see
    // values of order one whatever the magnitude of the data
    let scale = data_scale(&sel.samples);
    let samples: Vec<Sample> = sel.samples.iter().map(|s| Sample { u: s.u / scale, ..*s }).collect();
    let system = assemble(query, &samples, &cfg.scaling)?;
    let init = initial_theta(system.layout, idw / scale);
    let scaled_pde = ScaledPde { inner: pde, scale };
    let mut report = solve_dcbr(
        &system,
        cfg.physics.then_some(&scaled_pde as &dyn PdeModel),
        &samples,
        &init,
        &cfg.solver,
    );
    report.theta.iter_mut().for_each(|x| *x *= scale);
    report.objective *= scale * scale;

    let layout = system.layout;
    let theta = &report.theta;
    let field_vars_query = FieldVars::from_kappa(&theta[layout.query_kappa()]).unscaled(&cfg.scaling);
    let field_vars_neighbors: Vec<FieldVars> = (0..layout.k)
        .map(|i| FieldVars::from_kappa(&theta[layout.neighbor_kappa(i)]).unscaled(&cfg.scaling))
        .collect();
    let slack_summary = core::iter::once(&field_vars_query)
        .chain(&field_vars_neighbors)
        .fold((0.0f64, 0.0f64), |(g, q), fv| (g.max(fv.eps_g), q.max(fv.eps_q)));
    let solved = theta[layout.u_prime()];
    let degraded = !report.is_optimal() || !solved.is_finite();
    Ok(PredictionResult {
        u_prime: if degraded { idw } else { solved },
        field_vars_query,
        field_vars_neighbors,
        slack_summary,
        report,
        neighbor_ids: sel.ids,
        undersized: sel.undersized,
        degraded,
        idw,
    })
}
