//! The TOML run configuration.
//!
//! ```toml
//! [mcts]
//! iterations = 200
//! rng_seed = 7
//!
//! [executor]
//! timeout_seconds = 300.0
//!
//! [gate]
//! min_joins = 1
//!
//! [generate]
//! min_ratio = 2.0
//! ```
//!
//! Every section and key is optional; unknown keys are rejected.

use std::path::Path;

use serde::{Deserialize, Serialize};
use slowsql::corpus::{SeedGate, DEFAULT_MIN_RATIO};
use slowsql::exec::ExecutorConfig;
use slowsql::mcts::MctsConfig;
use slowsql::repair::DEFAULT_MAX_ROUNDS;
use slowsql_grpo::{AggregationWeights, RewardConfig};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerateConfig {
    pub min_ratio: f64,
    pub schema_id: Option<String>,
}

impl Default for GenerateConfig {
    fn default() -> Self {
        GenerateConfig { min_ratio: DEFAULT_MIN_RATIO, schema_id: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RepairConfig {
    pub max_rounds: usize,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig { max_rounds: DEFAULT_MAX_ROUNDS }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub mcts: MctsConfig,
    pub reward: RewardConfig,
    pub aggregation: AggregationWeights,
    pub executor: ExecutorConfig,
    pub gate: SeedGate,
    pub generate: GenerateConfig,
    pub repair: RepairConfig,
}

impl PipelineConfig {
    pub fn parse(text: &str) -> CliResult<Self> {
        let cfg: PipelineConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads `path`, or the defaults when no path is given.
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(PipelineConfig::default()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?;
                Self::parse(&text).map_err(|e| match e {
                    CliError::Config(m) => CliError::Config(format!("{}: {m}", p.display())),
                    other => other,
                })
            }
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        self.mcts.validate().map_err(CliError::Config)?;
        self.reward.validate().map_err(|e| CliError::Config(e.to_string()))?;
        self.executor.validate().map_err(CliError::Config)?;
        if !(self.generate.min_ratio > 0.0) {
            return Err(CliError::Config("generate.min_ratio must be positive".into()));
        }
        Ok(())
    }
}
