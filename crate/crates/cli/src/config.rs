//! Experiment files: one TOML document per experiment, sweeps as explicit
//! lists.

use serde::{Deserialize, Serialize};
use stablekit::feynman_kac::McConfig;
use stablekit::path::EulerConfig;
use stablekit::{DomainSpec, ModelSpec};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Subcommand name; when present it must match the subcommand invoked.
    #[serde(default)]
    pub operation: Option<String>,
    /// Mandatory: there is no clock-derived default.
    pub seed: u64,
    #[serde(default)]
    pub workers: Option<usize>,
    #[serde(default)]
    pub out: Option<String>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub domain: Option<DomainSpec>,
    #[serde(default)]
    pub mc: McSettings,
    /// Operation-specific parameters, parsed by the operation.
    #[serde(default)]
    pub params: toml::Table,
    #[serde(default)]
    pub sweep: Option<Sweep>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSettings {
    pub paths: u64,
    pub dt: f64,
    pub t_max: f64,
    /// Horizon as a multiple of a pilot mean exit time; 0 fixes it at t_max.
    pub horizon_factor: f64,
    pub epsilon: f64,
}

impl Default for McSettings {
    fn default() -> Self {
        McSettings {
            paths: 10_000,
            dt: 1e-3,
            t_max: 100.0,
            horizon_factor: 50.0,
            epsilon: 1e-2,
        }
    }
}

impl McSettings {
    pub fn euler(&self, alpha: f64) -> EulerConfig {
        let mut e = EulerConfig::new(self.dt, self.t_max, alpha);
        e.epsilon = self.epsilon;
        e
    }

    pub fn mc(&self, alpha: f64, seed: u64) -> McConfig {
        let mc = McConfig::new(self.euler(alpha), self.paths, seed);
        if self.horizon_factor == 0.0 {
            mc.fixed_horizon()
        } else {
            McConfig {
                adaptive_horizon: Some(self.horizon_factor),
                ..mc
            }
        }
    }
}

/// One swept key with its values; member i runs with sub-seed
/// derive_seed(seed, i).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKey {
    Alpha,
    Dt,
    Paths,
}

impl ExperimentConfig {
    pub fn parse(text: &str) -> Result<Self, String> {
        toml::from_str(text).map_err(|e| e.to_string())
    }

    /// A copy with the i-th sweep value applied.
    pub fn member(&self, key: SweepKey, v: f64) -> ExperimentConfig {
        let mut c = self.clone();
        match key {
            SweepKey::Alpha => {
                if let Some(m) = c.model.as_mut() {
                    m.alpha = v;
                }
            }
            SweepKey::Dt => c.mc.dt = v,
            SweepKey::Paths => c.mc.paths = v as u64,
        }
        c.sweep = None;
        c
    }
}
