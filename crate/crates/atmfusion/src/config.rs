//! Experiment configuration (TOML) and its content hash.

use std::path::Path;

use atmfusion_core::balance::SmoteConfig;
use atmfusion_core::features::UnfittablePolicy;
use atmfusion_core::fusion::{DEFAULT_K, DSEL_FRACTION};
use atmfusion_core::learners::ModelParams;
use atmfusion_core::simnet::{ProfileSpec, SimConfig, StatusNoiseModel};
use atmfusion_core::txstat::DEFAULT_CONFIDENCE;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: String,
        source: std::io::Error,
    },
    #[error("cannot parse {path}: {source}")]
    Parse {
        path: String,
        source: toml::de::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TxstatSection {
    pub confidence: f64,
    pub unfittable: UnfittablePolicy,
}

impl Default for TxstatSection {
    fn default() -> Self {
        TxstatSection {
            confidence: DEFAULT_CONFIDENCE,
            unfittable: UnfittablePolicy::Skip,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_ratio: f64,
}

impl Default for SplitSection {
    fn default() -> Self {
        SplitSection { train_ratio: 0.7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionSection {
    pub k_neighbors: usize,
    /// Share of the real training partition held out as the selection set.
    pub dsel_fraction: f64,
    pub dsel_seed: u64,
    /// Bagged trees in the KNORA-E pool.
    pub des_pool_size: usize,
    pub stacking_folds: usize,
    pub stacking_seed: u64,
}

impl Default for FusionSection {
    fn default() -> Self {
        FusionSection {
            k_neighbors: DEFAULT_K,
            dsel_fraction: DSEL_FRACTION,
            dsel_seed: 1,
            des_pool_size: 10,
            stacking_folds: 5,
            stacking_seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sim: SimConfig,
    pub profile: ProfileSpec,
    pub noise: StatusNoiseModel,
    pub txstat: TxstatSection,
    pub split: SplitSection,
    pub smote: SmoteConfig,
    pub models: ModelParams,
    pub fusion: FusionSection,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: origin.to_string(),
            source,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: atmfusion_core::Error| ConfigError::Invalid(e.to_string());
        self.sim.validate().map_err(invalid)?;
        self.profile.validate().map_err(invalid)?;
        self.noise.validate().map_err(invalid)?;
        let checks = [
            (
                self.txstat.confidence > 0.0 && self.txstat.confidence < 1.0,
                "txstat.confidence must be in (0, 1)",
            ),
            (
                self.split.train_ratio > 0.0 && self.split.train_ratio < 1.0,
                "split.train_ratio must be in (0, 1)",
            ),
            (self.smote.k_neighbors >= 1, "smote.k_neighbors must be at least 1"),
            (self.fusion.k_neighbors >= 1, "fusion.k_neighbors must be at least 1"),
            (
                self.fusion.dsel_fraction > 0.0 && self.fusion.dsel_fraction < 1.0,
                "fusion.dsel_fraction must be in (0, 1)",
            ),
            (self.fusion.des_pool_size >= 2, "fusion.des_pool_size must be at least 2"),
            (
                (2..=255).contains(&self.fusion.stacking_folds),
                "fusion.stacking_folds must be in 2..=255",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(ConfigError::Invalid(msg.to_string())),
            None => Ok(()),
        }
    }

    /// Canonical JSON form: struct fields in declaration order, maps sorted.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("configuration serializes")
    }

    /// Hex SHA-256 of the canonical JSON.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.canonical_json().as_bytes()))
    }
}
