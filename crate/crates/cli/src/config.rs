//! Configuration file (TOML or JSON) merged with command-line overrides.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use duet_core::orchestrator::RunConfig;
use duet_core::policies::LlmPolicyConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum AgentKind {
    Oracle,
    Null,
    Llm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
#[value(rename_all = "snake_case")]
pub enum UserKind {
    Oracle,
    Compliance,
    Noisy,
    Llm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub agent: AgentKind,
    pub user: UserKind,
    /// Hesitation probability for the noisy user.
    pub noise: f64,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            agent: AgentKind::Oracle,
            user: UserKind::Oracle,
            noise: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub seed: u64,
}

impl Default for SampleConfig {
    fn default() -> Self {
        SampleConfig { seed: 42 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub domain: String,
    /// Store root for runs and session checkpoints.
    pub store: String,
    pub run: RunConfig,
    pub policies: PolicyConfig,
    pub llm: LlmPolicyConfig,
    pub sample: SampleConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            domain: "telecom".into(),
            store: "duet-store".into(),
            run: RunConfig::default(),
            policies: PolicyConfig::default(),
            llm: LlmPolicyConfig::default(),
            sample: SampleConfig::default(),
        }
    }
}

impl Config {
    /// Reads `path` (`.json` as JSON, anything else as TOML); without a
    /// path the defaults apply. Environment variables fill the LLM endpoint
    /// and key.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let config = match path {
            None => Config::default(),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                if p.extension().is_some_and(|x| x == "json") {
                    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
                } else {
                    toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
                }
            }
        };
        Ok(Config {
            llm: config.llm.clone().with_env(),
            ..config
        })
    }
}
