//! Experiment configuration: structured text (TOML) with manifold name and
//! parameters, base complex, refinement levels, region box, seed and
//! tolerances.

use super::HarnessError;
use serde::Deserialize;
use std::collections::HashMap;

#[derive(Debug, Clone, Deserialize)]
pub struct ManifoldCfg {
    pub name: String,
    #[serde(default)]
    pub params: HashMap<String, f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct RegionCfg {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct Tolerances {
    /// Sample count used when tracing curves through a polyhedron.
    #[serde(default = "default_trace_samples")]
    pub trace_samples: usize,
    /// Number of seeded geodesics for the transport-gap column.
    #[serde(default = "default_geodesic_count")]
    pub geodesic_count: usize,
    /// Geodesic length; 0 picks a manifold-dependent default.
    #[serde(default)]
    pub geodesic_length: f64,
}

fn default_trace_samples() -> usize {
    400
}

fn default_geodesic_count() -> usize {
    10
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            trace_samples: default_trace_samples(),
            geodesic_count: default_geodesic_count(),
            geodesic_length: 0.0,
        }
    }
}

/// Minimal config for the Monte Carlo kinematic estimator.
#[derive(Debug, Clone, Deserialize)]
pub struct KinematicConfig {
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: Option<String>,
}

fn default_dimension() -> usize {
    3
}

fn default_samples() -> usize {
    1_000_000
}

impl KinematicConfig {
    pub fn from_file(path: &str) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| HarnessError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct ExperimentConfig {
    pub manifold: ManifoldCfg,
    pub base_complex: String,
    pub levels: Vec<u32>,
    #[serde(default)]
    pub region: Option<RegionCfg>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: Option<String>,
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, HarnessError> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if cfg.levels.is_empty() {
            return Err(HarnessError::Config("levels must be nonempty".into()));
        }
        if cfg.levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(HarnessError::Config(
                "levels must be strictly increasing".into(),
            ));
        }
        Ok(cfg)
    }

    pub fn from_file(path: &str) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }
}
