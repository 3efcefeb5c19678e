//! Experiment configuration with TOML loading and validation.

use crate::grid::{FeederSpec, GridError};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Errors from loading or validating a configuration.
#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("failed to read {path}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid TOML in {path}")]
    Parse {
        path: PathBuf,
        source: Box<toml::de::Error>,
    },
    #[error("invalid configuration: {0}")]
    Grid(#[from] GridError),
    #[error("invalid configuration: {0}")]
    Invalid(&'static str),
}

/// Full description of one experiment run.
///
/// Every field has a default, so a TOML file only needs the entries it
/// wants to override. Unknown keys are rejected to catch typos.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Base seed of all sampling streams.
    pub seed: u64,
    /// Monte-Carlo scenarios per feeder.
    pub n_samples: usize,
    /// DER counts of the feeder family to run.
    pub node_counts: Vec<usize>,
    /// Installed active power summed over the feeder, kW.
    pub total_installed_p_kw: f64,
    /// Average distance between transformer and DER nodes, m.
    pub avg_trafo_node_dist_m: f64,
    /// Rated power factor shared by all units.
    pub cos_phi: f64,
    pub v_min_pu: f64,
    pub v_max_pu: f64,
    /// Include transformer loading in the thermal constraint.
    pub include_trafo_loading: bool,
    /// Bins of the aggregate-power density comparison.
    pub density_bins: usize,
    /// Worker threads for the scenario solves; omit to let the runtime
    /// pick one per core.
    pub workers: Option<usize>,
    /// Directory receiving CSVs, summaries, and figures.
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            n_samples: 2500,
            node_counts: vec![1, 3, 9, 27],
            total_installed_p_kw: 200.0,
            avg_trafo_node_dist_m: 400.0,
            cos_phi: 0.9,
            v_min_pu: 0.9,
            v_max_pu: 1.1,
            include_trafo_loading: false,
            density_bins: 80,
            workers: None,
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    /// Reads and validates a TOML configuration file.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let config: Self = toml::from_str(&text).map_err(|source| ConfigError::Parse {
            path: path.to_path_buf(),
            source: Box::new(source),
        })?;
        config.validate()?;
        Ok(config)
    }

    /// Checks all fields, including the feeder parameters of every
    /// requested node count.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_samples == 0 {
            return Err(ConfigError::Invalid("n_samples must be positive"));
        }
        if self.node_counts.is_empty() {
            return Err(ConfigError::Invalid("node_counts must not be empty"));
        }
        if self.density_bins == 0 {
            return Err(ConfigError::Invalid("density_bins must be positive"));
        }
        if self.workers == Some(0) {
            return Err(ConfigError::Invalid(
                "workers must be positive (omit the key for automatic)",
            ));
        }
        for &n in &self.node_counts {
            self.feeder_spec(n).validate()?;
        }
        Ok(())
    }

    /// Feeder parameters for one member of the configured family.
    pub fn feeder_spec(&self, n_nodes: usize) -> FeederSpec {
        FeederSpec {
            n_nodes,
            total_installed_p_kw: self.total_installed_p_kw,
            avg_trafo_node_dist_m: self.avg_trafo_node_dist_m,
            cos_phi: self.cos_phi,
            v_min_pu: self.v_min_pu,
            v_max_pu: self.v_max_pu,
            ..FeederSpec::canonical(n_nodes)
        }
    }
}
