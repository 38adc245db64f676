use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(thiserror::Error, Debug, Clone, PartialEq)]
pub enum Error {
    #[error("no neighbours supplied for constraint assembly")]
    EmptyNeighbors,
    #[error("neighbours {first} and {second} share the same spatio-temporal point")]
    DuplicateNeighbor { first: usize, second: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("time step {dt} exceeds the explicit stability bound {bound}")]
    Unstable { dt: f64, bound: f64 },
    #[error("simulation produced a non-finite value at step {step}")]
    BlowUp { step: usize },
    #[error("requested {requested} nodes per axis but the truth grid has only {available}")]
    GridTooFine { requested: usize, available: usize },
    #[error("prediction and truth snapshots do not share the same node set")]
    NodeSetMismatch,
    #[error("dimension mismatch: {0}")]
    Dimension(&'static str),
}
