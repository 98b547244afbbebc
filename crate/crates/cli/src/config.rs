//! Flat TOML configuration files. Unknown keys are rejected.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use fast_core::bench::{ArCell, ExperimentConfig};
use fast_core::glm::{build_design, BlockSchedule, DesignMatrix};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub fn load_toml<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Block design of the time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DesignConfig {
    pub n_scans: usize,
    pub tr: f64,
    pub block_len: usize,
    pub drift_order: usize,
}

impl Default for DesignConfig {
    fn default() -> Self {
        DesignConfig { n_scans: 96, tr: 7.0, block_len: 6, drift_order: 1 }
    }
}

impl DesignConfig {
    pub fn design(&self) -> Result<DesignMatrix<f64>> {
        anyhow::ensure!(self.block_len > 0, "block_len must be positive");
        let schedule = BlockSchedule::alternating(self.n_scans.div_ceil(self.block_len), self.block_len);
        Ok(build_design(&schedule, self.n_scans, self.tr, self.drift_order)?)
    }
}

/// Phantom simulation settings for `simulate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulateConfig {
    pub master_seed: u64,
    pub replicates: usize,
    pub sigma0: f64,
    pub ar_cell: ArCell,
    pub n_scans: usize,
    pub tr: f64,
    pub block_len: usize,
    pub drift_order: usize,
    pub phantom: Option<PathBuf>,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        let d = DesignConfig::default();
        SimulateConfig {
            master_seed: 0,
            replicates: 1,
            sigma0: 300.0,
            ar_cell: "p1".parse().expect("valid cell"),
            n_scans: d.n_scans,
            tr: d.tr,
            block_len: d.block_len,
            drift_order: d.drift_order,
            phantom: None,
        }
    }
}

impl SimulateConfig {
    pub fn design_config(&self) -> DesignConfig {
        DesignConfig {
            n_scans: self.n_scans,
            tr: self.tr,
            block_len: self.block_len,
            drift_order: self.drift_order,
        }
    }

    /// The benchmark settings whose replicate `r` simulates the same data.
    pub fn as_experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            master_seed: self.master_seed,
            replicates: self.replicates,
            sigma0: vec![self.sigma0],
            ar_cells: vec![self.ar_cell],
            n_scans: self.n_scans,
            tr: self.tr,
            block_len: self.block_len,
            drift_order: self.drift_order,
            phantom: self.phantom.clone(),
            ..ExperimentConfig::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_fail() {
        assert!(toml::from_str::<DesignConfig>("n_scans = 96\nbogus = 1\n").is_err());
        assert!(toml::from_str::<ExperimentConfig>("replicate = 2\n").is_err());
        let c: SimulateConfig = toml::from_str("sigma0 = 400.0\nar_cell = \"p4-decreasing\"\n").unwrap();
        assert_eq!(c.ar_cell.p, 4);
    }

    #[test]
    fn experiment_config_parses_flat_keys() {
        let text = r#"
            master_seed = 7
            replicates = 2
            sigma0 = [300.0, 400.0]
            ar_cells = ["p0", "p1", "p4-decreasing"]
            methods = ["am-fast", "ct"]
            alphas = [0.025]
            sided = "one"
            ct_mc_iters = 200
        "#;
        let c: ExperimentConfig = toml::from_str(text).unwrap();
        c.validate().unwrap();
        assert_eq!(c.ar_cells.len(), 3);
        assert_eq!(c.ct_mc_iters, 200);
    }
}
