//! Training-free physics-informed pointwise regression.
//!
//! Every prediction is an independent constrained optimisation. Taylor
//! expansions (with Gauss–Lobatto quadrature of the integral remainder)
//! between the query and its neighbouring samples, and between each pair of
//! samples, become linear inequalities over the unknown state, gradients,
//! Hessians and non-negative remainder slacks. The governing PDE enters as
//! equality constraints. Minimising the slacks gives the smallest error
//! bounds consistent with both data and physics.
//!
//! The crate is `no_std` (it needs `alloc`). File formats, the CLI and the
//! threaded grid evaluation live in the companion `physreg` crate.
//!
//! Module map:
//!
//! * [`types`]: points, samples, snapshots, displacements, field variables
//! * [`quadrature`]: the 3-point Gauss–Lobatto rule behind the constraints
//! * [`taylor`]: query–sample and sample–sample blocks, system assembly
//! * [`neighbors`]: local sample selection
//! * [`physics`]: PDE equality rows and the nonlinear query residual
//! * [`qp`], [`sqp`]: dense interior-point QP and the outer linearisation loop
//! * [`predict`]: the end-to-end pipeline
//! * [`sim`]: reaction–diffusion ground truth and GRID/RAND datasets
//! * [`metrics`]: the L2 relative snapshot error
#![no_std]
#![cfg_attr(docsrs, feature(doc_cfg))]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
pub mod linalg;
pub mod metrics;
pub mod neighbors;
pub mod physics;
pub mod predict;
pub mod qp;
pub mod quadrature;
pub mod sim;
pub mod sqp;
pub mod taylor;
pub mod types;

pub use error::{Error, Result};
pub use metrics::{l2_relative_error, ErrorCurve};
pub use neighbors::{select_neighbors, NeighborConfig, NeighborSelection};
pub use physics::{LinearPde, PdeModel, RdsParams, ScaledPde};
pub use predict::{predict, PredictConfig, PredictionResult};
pub use qp::{solve_qp, QpProblem, QpSettings, SolveReport, SolveStatus};
pub use sqp::{solve_dcbr, SqpSettings};
pub use taylor::{assemble, query_sample_block, sample_pair_block, ConstraintBlock, ConstraintSystem};
pub use types::{
    displacement, AxisScaling, Displacement, FieldVars, Sample, Snapshot, SpatioTemporalPoint,
    ThetaLayout,
};
