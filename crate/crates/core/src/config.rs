//! TOML tool configuration shared by all subcommands.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocate::{BadsParams, ExpCurve, TierParams};
use crate::mining::MiningConfig;
use crate::orchestrate::GeneratorSpec;
use crate::predict::SchwaParams;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BadsSection {
    pub curve: ExpCurve<f64>,
    /// Single-tier minimum per component; defaults to a fifth of the
    /// per-component budget.
    pub min_budget: Option<f64>,
    /// Predictor overhead charged when no value is given on the command line.
    pub predictor_overhead: f64,
}

impl Default for BadsSection {
    fn default() -> Self {
        Self { curve: ExpCurve::default(), min_budget: None, predictor_overhead: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TiersSection {
    pub enabled: bool,
    pub split_fraction: f64,
    pub tier1_budget_fraction: f64,
    /// Defaults to the per-component budget.
    pub tier1_min_budget: Option<f64>,
    /// Defaults to a fifth of the per-component budget.
    pub tier2_min_budget: Option<f64>,
}

impl Default for TiersSection {
    fn default() -> Self {
        Self { enabled: true, split_fraction: 0.5, tier1_budget_fraction: 0.9, tier1_min_budget: None, tier2_min_budget: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolConfig {
    pub output_root: PathBuf,
    pub mining: MiningConfig,
    pub schwa: SchwaParams<f64>,
    pub bads: BadsSection,
    pub tiers: TiersSection,
    pub generator: GeneratorSpec,
}

impl Default for ToolConfig {
    fn default() -> Self {
        Self {
            output_root: PathBuf::from("."),
            mining: MiningConfig::default(),
            schwa: SchwaParams::default(),
            bads: BadsSection::default(),
            tiers: TiersSection::default(),
            generator: GeneratorSpec::default(),
        }
    }
}

/// How a run's allocation is parameterized once the budget is known.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationSettings {
    pub bads: BadsParams<f64>,
    pub tiers: Option<TierParams<f64>>,
}

impl ToolConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let config: ToolConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        self.mining.validate().map_err(|e| invalid(&e))?;
        self.schwa.validate().map_err(|e| invalid(&e))?;
        if let Some(min) = self.bads.min_budget {
            if !(min >= 0.0) {
                return Err(ConfigError::Invalid("bads.min_budget must be >= 0".into()));
            }
        }
        if !(self.bads.predictor_overhead >= 0.0) {
            return Err(ConfigError::Invalid("bads.predictor_overhead must be >= 0".into()));
        }
        let t = &self.tiers;
        for (name, v) in [("split_fraction", t.split_fraction), ("tier1_budget_fraction", t.tier1_budget_fraction)] {
            if !(v > 0.0 && v < 1.0) {
                return Err(ConfigError::Invalid(format!("tiers.{name} must lie in (0, 1)")));
            }
        }
        for (name, v) in [("tier1_min_budget", t.tier1_min_budget), ("tier2_min_budget", t.tier2_min_budget)] {
            if v.is_some_and(|v| !(v >= 0.0)) {
                return Err(ConfigError::Invalid(format!("tiers.{name} must be >= 0")));
            }
        }
        if !self.generator.command.is_empty() {
            self.generator.validate().map_err(|e| invalid(&e))?;
        }
        Ok(())
    }

    /// Allocation parameters for `count` components sharing `total_budget`.
    pub fn allocation_settings(&self, count: usize, total_budget: f64, predictor_overhead: f64) -> AllocationSettings {
        let per_class = total_budget / count.max(1) as f64;
        let auto = TierParams::for_per_class_budget(per_class);
        let bads = BadsParams {
            curve: self.bads.curve,
            min_budget: self.bads.min_budget.unwrap_or(auto.tier2_min_budget),
            total_budget,
            predictor_overhead,
        };
        let tiers = self.tiers.enabled.then(|| TierParams {
            split_fraction: self.tiers.split_fraction,
            tier1_budget_fraction: self.tiers.tier1_budget_fraction,
            tier1_min_budget: self.tiers.tier1_min_budget.unwrap_or(auto.tier1_min_budget),
            tier2_min_budget: self.tiers.tier2_min_budget.unwrap_or(auto.tier2_min_budget),
        });
        AllocationSettings { bads, tiers }
    }
}
