use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use seqbed::agents::{AgentConfig, AgentConfigPatch, EvalMethod};
use seqbed::envs::{Override, ProblemConfig};

pub const DEFAULT_CHUNK: usize = 10_000;

fn default_rollouts() -> usize {
    2000
}

fn default_eval_l() -> usize {
    1_000_000
}

fn default_out() -> PathBuf {
    PathBuf::from("runs")
}

fn default_chunk() -> usize {
    DEFAULT_CHUNK
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EvalConfig {
    #[serde(default = "default_rollouts")]
    pub rollouts: usize,
    #[serde(rename = "L", default = "default_eval_l")]
    pub l: usize,
    /// `k=1,2,3` or `nu=0.005,0.01`; absent means the training problem only.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub overrides: Option<String>,
    #[serde(default)]
    pub sunrise_method: EvalMethod,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { rollouts: default_rollouts(), l: default_eval_l(), overrides: None, sunrise_method: EvalMethod::default() }
    }
}

/// One JSON document describing a full run: problem, agent, seeds, training
/// length and evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Algorithm label used in result rows; defaults to the variant name.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    pub problem: ProblemConfig,
    #[serde(default)]
    pub agent: AgentConfigPatch,
    pub seeds: Vec<u64>,
    pub iterations: u64,
    #[serde(default)]
    pub eval: EvalConfig,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    #[serde(default = "default_chunk")]
    pub chunk: usize,
}

/// Deserializes JSON, reporting the key path of the first offending field.
pub fn parse_json<T: DeserializeOwned>(text: &str, what: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        anyhow::anyhow!("malformed {what} at `{path}`: {}", e.into_inner())
    })
}

pub fn parse_overrides(spec: Option<&str>) -> Result<Vec<Override>> {
    match spec {
        None => Ok(vec![Override::None]),
        Some(s) => Ok(Override::parse_list(s)?),
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let cfg: Self = parse_json(&text, &format!("config {}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = parse_json(text, "config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            bail!("config key `seeds` must list at least one seed");
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            bail!("config key `seeds` lists a seed twice");
        }
        if self.eval.l == 0 || self.eval.rollouts == 0 {
            bail!("config keys `eval.L` and `eval.rollouts` must be >= 1");
        }
        if self.chunk == 0 {
            bail!("config key `chunk` must be >= 1");
        }
        self.agent_config()?;
        for ov in parse_overrides(self.eval.overrides.as_deref()).context("config key `eval.overrides`")? {
            self.problem.build_with(&ov).context("config key `eval.overrides`")?;
        }
        Ok(())
    }

    pub fn agent_config(&self) -> Result<AgentConfig> {
        self.agent.resolve(self.problem.problem).context("config key `agent`")
    }

    pub fn algorithm(&self) -> Result<String> {
        Ok(match &self.name {
            Some(n) => n.clone(),
            None => self.agent_config()?.variant.label().to_string(),
        })
    }

    /// SHA-256 over the resolved problem, agent and training length.
    pub fn config_hash(&self) -> Result<String> {
        let canonical = serde_json::json!({
            "problem": self.problem,
            "agent": self.agent_config()?,
            "iterations": self.iterations,
        });
        Ok(sha256_hex(canonical.to_string().as_bytes()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}
