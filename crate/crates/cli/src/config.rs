//! Experiment configuration file and command-line overrides.

use std::path::{Path, PathBuf};

use dsf_core::harness::{InitialState, PolicyKind, PolicyStub, ThetaMode};
use dsf_core::lmi::structured::StructuredOptions;
use dsf_core::{MembershipMode, ModelSpec, ObjectiveMode, SynthesisConfig, Tolerances};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ConfigError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum FilterChoice {
    Explicit,
    Implicit,
    None,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionConfig {
    pub m: usize,
    /// Defaults to the master seed.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Coordinates the generators are drawn in.
    #[serde(default)]
    pub subspace: Option<Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverageConfig {
    pub m_list: Vec<usize>,
    pub gamma_list: Vec<f64>,
    #[serde(default = "default_partitions")]
    pub partitions_per_cell: usize,
    #[serde(default = "default_samples")]
    pub samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareConfig {
    #[serde(default = "default_pairs")]
    pub pairs: usize,
    #[serde(default)]
    pub min_certified: usize,
    #[serde(default = "default_input_scale")]
    pub input_scale: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self { pairs: default_pairs(), min_certified: 0, input_scale: default_input_scale() }
    }
}

fn default_partitions() -> usize {
    5
}
fn default_samples() -> usize {
    10_000
}
fn default_pairs() -> usize {
    200
}
fn default_input_scale() -> f64 {
    1.5
}
fn default_horizon() -> usize {
    1000
}
fn default_episodes() -> usize {
    1
}
fn default_policy() -> PolicyStub {
    PolicyStub::new(PolicyKind::RandomInU)
}
fn default_theta() -> ThetaMode {
    ThetaMode::RandomVertex
}
fn default_initial() -> InitialState {
    InitialState::Feasible
}
fn default_filter() -> FilterChoice {
    FilterChoice::Explicit
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    /// Overrides the uncertainty level inside `model`.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    pub partition: Option<PartitionConfig>,
    #[serde(default)]
    pub objective: ObjectiveMode,
    #[serde(default)]
    pub structured: StructuredOptions,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default = "default_filter")]
    pub filter: FilterChoice,
    #[serde(default)]
    pub membership: MembershipMode,
    #[serde(default = "default_policy")]
    pub policy: PolicyStub,
    #[serde(default = "default_theta")]
    pub theta: ThetaMode,
    #[serde(default = "default_initial")]
    pub initial: InitialState,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default)]
    pub coverage: Option<CoverageConfig>,
    #[serde(default)]
    pub compare: CompareConfig,
    /// Family file for simulate/compare, relative to the config file. Left
    /// out of the hash so moving files around keeps it stable.
    #[serde(default, skip_serializing)]
    pub family: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig = serde_json::from_str(&text)
            .map_err(|e| ConfigError(format!("config {}: {e}", path.display())))?;
        if let Some(f) = &cfg.family {
            if f.is_relative() {
                cfg.family = Some(path.parent().unwrap_or(Path::new(".")).join(f));
            }
        }
        Ok(cfg)
    }

    pub fn model_spec(&self) -> ModelSpec {
        match self.gamma {
            Some(g) => self.model.with_gamma(g),
            None => self.model.clone(),
        }
    }

    pub fn synthesis(&self) -> SynthesisConfig {
        SynthesisConfig { objective: self.objective, structured: self.structured, tolerances: self.tolerances }
    }

    pub fn partition_seed(&self) -> u64 {
        self.partition.as_ref().and_then(|p| p.seed).unwrap_or(self.seed)
    }

    /// Field-level range checks.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |msg: String| Err(ConfigError(msg));
        if let Some(g) = self.gamma {
            if !(0.0..1.0).contains(&g) {
                return bad(format!("gamma: {g} is outside [0, 1)"));
            }
        }
        if let Some(p) = &self.partition {
            if p.m == 0 {
                return bad("partition.m: must be at least 1".into());
            }
        }
        if self.horizon == 0 {
            return bad("horizon: must be at least 1".into());
        }
        if self.episodes == 0 {
            return bad("episodes: must be at least 1".into());
        }
        if !(self.policy.scale.is_finite() && self.policy.scale >= 0.0) {
            return bad(format!("policy.scale: {} must be finite and non-negative", self.policy.scale));
        }
        if let Some(c) = &self.coverage {
            if c.m_list.is_empty() || c.m_list.contains(&0) {
                return bad("coverage.m_list: needs at least one entry, all >= 1".into());
            }
            if c.gamma_list.is_empty() || c.gamma_list.iter().any(|g| !(0.0..1.0).contains(g)) {
                return bad("coverage.gamma_list: needs at least one entry, all in [0, 1)".into());
            }
            if c.partitions_per_cell == 0 || c.samples == 0 {
                return bad("coverage: partitions_per_cell and samples must be at least 1".into());
            }
        }
        if self.compare.pairs == 0 {
            return bad("compare.pairs: must be at least 1".into());
        }
        if !(self.compare.input_scale.is_finite() && self.compare.input_scale > 0.0) {
            return bad("compare.input_scale: must be positive".into());
        }
        if !(self.structured.eps > 0.0 && self.structured.backoff >= 0.0 && self.structured.backoff < 1.0) {
            return bad("structured: eps must be positive and backoff in [0, 1)".into());
        }
        if !(0.0..1.0).contains(&self.structured.contraction) {
            return bad("structured.contraction: must be in [0, 1)".into());
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }
}
