//! File formats, batch prediction, benchmarks and the command line for
//! `physreg-core`.

pub mod bench;
pub mod config;
pub mod error;
pub mod grid;
pub mod io;

pub use physreg_core as core;
