//! The merged run configuration and its hash.

use std::path::{Path, PathBuf};

use physreg_core::sim::SimConfig;
use physreg_core::{AxisScaling, NeighborConfig, PredictConfig, RdsParams, SqpSettings};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, Result};

/// Environment variable that overrides the default output root.
pub const OUTPUT_ROOT_ENV: &str = "PHYSREG_OUTPUT_ROOT";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub sim: SimConfig,
    pub rds: RdsParams,
    pub neighbors: NeighborConfig,
    pub scaling: AxisScaling,
    pub solver: SqpSettings,
    pub physics: bool,
    pub seed: u64,
    /// Worker threads for grid prediction; `0` uses every logical core.
    pub workers: usize,
    /// Every `stride`-th truth node per axis is scored by the benchmarks.
    pub score_stride: usize,
    pub output_root: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        let p = PredictConfig::default();
        Self {
            sim: SimConfig::default(),
            rds: RdsParams::default(),
            neighbors: p.neighbors,
            scaling: p.scaling,
            solver: p.solver,
            physics: p.physics,
            seed: 0,
            workers: 0,
            score_stride: 1,
            output_root: PathBuf::from("results"),
        }
    }
}

impl RunConfig {
    /// Reads a JSON file; absent fields take their defaults.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(AppError::io(path))?;
        serde_json::from_str(&text).map_err(|source| AppError::Json { path: path.into(), source })
    }

    pub fn validate(&self) -> Result<()> {
        self.sim.validate(&self.rds)?;
        self.predict_config().validate()?;
        if self.score_stride == 0 {
            return Err(AppError::Config("score_stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn predict_config(&self) -> PredictConfig {
        PredictConfig { neighbors: self.neighbors, scaling: self.scaling, solver: self.solver, physics: self.physics }
    }

    pub fn worker_count(&self) -> usize {
        resolve_workers(self.workers)
    }

    /// Hex SHA-256 of the canonical JSON form, paths excluded.
    pub fn hash(&self) -> String {
        let mut canon = self.clone();
        canon.output_root = PathBuf::new();
        canon.workers = 0;
        let json = serde_json::to_vec(&canon).expect("config serialises");
        hex::encode(Sha256::digest(&json))
    }

    /// `output_root`, unless the environment override is set.
    pub fn resolved_output_root(&self) -> PathBuf {
        match std::env::var_os(OUTPUT_ROOT_ENV) {
            Some(v) if !v.is_empty() => PathBuf::from(v),
            _ => self.output_root.clone(),
        }
    }
}

pub fn resolve_workers(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}
