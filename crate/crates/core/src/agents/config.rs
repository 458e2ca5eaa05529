use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envs::ProblemKind;
use crate::error::{invalid, Result};
use crate::policy::PolicyWidths;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "SAC")]
    Sac,
    #[serde(rename = "REDQ")]
    Redq,
    #[serde(rename = "DROQ")]
    Droq,
    #[serde(rename = "SBR")]
    Sbr,
    #[serde(rename = "SUNRISE")]
    Sunrise,
    #[serde(rename = "SUNRISE_DROQ")]
    SunriseDroq,
}

impl Variant {
    pub fn is_sunrise(self) -> bool {
        matches!(self, Variant::Sunrise | Variant::SunriseDroq)
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Sac => "SAC",
            Variant::Redq => "REDQ",
            Variant::Droq => "DROQ",
            Variant::Sbr => "SBR",
            Variant::Sunrise => "SUNRISE",
            Variant::SunriseDroq => "SUNRISE_DROQ",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Fully resolved agent hyperparameters.
///
/// For the SUNRISE variants `N` counts agents (each with one critic);
/// otherwise it counts critics of the single agent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub variant: Variant,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    #[serde(rename = "G")]
    pub utd: usize,
    pub gamma: f64,
    pub tau: f64,
    pub policy_lr: f64,
    pub critic_lr: f64,
    pub alpha_lr: f64,
    pub init_alpha: f64,
    /// `None` means `-d_xi`.
    pub target_entropy: Option<f64>,
    pub dropout: f64,
    pub layer_norm: bool,
    pub reset_interval: Option<u64>,
    pub ucb_lambda: f64,
    pub bellman_temp: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub policy_widths: PolicyWidths,
    pub critic_hidden: Vec<usize>,
}

/// Partial configuration as written in run files; see [`AgentConfigPatch::resolve`].
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfigPatch {
    pub variant: Option<Variant>,
    #[serde(rename = "N", skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(rename = "M", skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(rename = "G", skip_serializing_if = "Option::is_none")]
    pub utd: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critic_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_lr: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_entropy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dropout: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layer_norm: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reset_interval: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ucb_lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bellman_temp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub buffer_capacity: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub policy_widths: Option<PolicyWidths>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub critic_hidden: Option<Vec<usize>>,
}

impl AgentConfigPatch {
    /// Fills unset fields from the variant's preset for the given problem.
    /// The variant defaults to REDQ.
    pub fn resolve(&self, problem: ProblemKind) -> Result<AgentConfig> {
        let b = AgentConfig::preset(self.variant.unwrap_or(Variant::Redq), problem);
        let cfg = AgentConfig {
            variant: b.variant,
            n: self.n.unwrap_or(b.n),
            m: self.m.unwrap_or(b.m),
            utd: self.utd.unwrap_or(b.utd),
            gamma: self.gamma.unwrap_or(b.gamma),
            tau: self.tau.unwrap_or(b.tau),
            policy_lr: self.policy_lr.unwrap_or(b.policy_lr),
            critic_lr: self.critic_lr.unwrap_or(b.critic_lr),
            alpha_lr: self.alpha_lr.or(self.critic_lr).unwrap_or(b.alpha_lr),
            init_alpha: self.init_alpha.unwrap_or(b.init_alpha),
            target_entropy: self.target_entropy.or(b.target_entropy),
            dropout: self.dropout.unwrap_or(b.dropout),
            layer_norm: self.layer_norm.unwrap_or(b.layer_norm),
            reset_interval: self.reset_interval.or(b.reset_interval),
            ucb_lambda: self.ucb_lambda.unwrap_or(b.ucb_lambda),
            bellman_temp: self.bellman_temp.unwrap_or(b.bellman_temp),
            batch_size: self.batch_size.unwrap_or(b.batch_size),
            buffer_capacity: self.buffer_capacity.unwrap_or(b.buffer_capacity),
            policy_widths: self.policy_widths.clone().unwrap_or(b.policy_widths),
            critic_hidden: self.critic_hidden.clone().unwrap_or(b.critic_hidden),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl AgentConfig {
    /// REDQ defaults: `N = M = 2`, `G = 64`, `gamma = 0.9`, `tau = 0.001`,
    /// learning rates `1e-4` (policy) and `3e-4` (critics), batch 4096.
    pub fn redq() -> Self {
        Self {
            variant: Variant::Redq,
            n: 2,
            m: 2,
            utd: 64,
            gamma: 0.9,
            tau: 0.001,
            policy_lr: 1e-4,
            critic_lr: 3e-4,
            alpha_lr: 3e-4,
            init_alpha: 1.0,
            target_entropy: None,
            dropout: 0.0,
            layer_norm: false,
            reset_interval: None,
            ucb_lambda: 1.0,
            bellman_temp: 20.0,
            batch_size: 4096,
            buffer_capacity: 10_000_000,
            policy_widths: PolicyWidths::default(),
            critic_hidden: vec![128, 128],
        }
    }

    pub fn preset(variant: Variant, problem: ProblemKind) -> Self {
        let location = problem == ProblemKind::LocationFinding;
        let p = if location { 0.01 } else { 0.1 };
        let delta = if location { 20.0 } else { 10.0 };
        let base = Self::redq();
        match variant {
            Variant::Sac => Self { variant, utd: 1, ..base },
            Variant::Redq => base,
            Variant::Droq => droq_configure(Self { variant, ..base }, p),
            Variant::Sbr => Self { variant, reset_interval: Some(430_000), ..base },
            Variant::Sunrise => Self { variant, m: 1, bellman_temp: delta, ..base },
            Variant::SunriseDroq => {
                Self { variant, m: 1, tau: 0.01, dropout: p, layer_norm: true, bellman_temp: delta, ..base }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return invalid("N must be >= 1");
        }
        if matches!(self.variant, Variant::Redq | Variant::Sbr) && (self.m == 0 || self.m > self.n) {
            return invalid(format!("need 1 <= M <= N, got N={} M={}", self.n, self.m));
        }
        if self.variant.is_sunrise() && self.n < 2 {
            return invalid("SUNRISE needs at least two agents");
        }
        if self.utd == 0 {
            return invalid("G must be >= 1");
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) && self.gamma != 0.0 {
            return invalid(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.tau > 0.0 && self.tau <= 1.0) {
            return invalid(format!("tau must lie in (0, 1], got {}", self.tau));
        }
        for (name, v) in [("policy_lr", self.policy_lr), ("critic_lr", self.critic_lr), ("alpha_lr", self.alpha_lr), ("init_alpha", self.init_alpha)] {
            if !(v > 0.0 && v.is_finite()) {
                return invalid(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if self.reset_interval == Some(0) {
            return invalid("reset_interval must be >= 1");
        }
        if self.bellman_temp < 0.0 || self.ucb_lambda < 0.0 {
            return invalid("bellman_temp and ucb_lambda must be nonnegative");
        }
        if self.batch_size == 0 || self.buffer_capacity == 0 {
            return invalid("batch_size and buffer_capacity must be >= 1");
        }
        if self.policy_widths.summary == 0 {
            return invalid("summary width must be >= 1");
        }
        Ok(())
    }

    pub fn members(&self) -> usize {
        if self.variant.is_sunrise() {
            self.n
        } else {
            1
        }
    }

    pub fn critics_per_member(&self) -> usize {
        if self.variant.is_sunrise() {
            1
        } else {
            self.n
        }
    }

    /// Size of the in-target minimisation subset. SAC and DroQ take the
    /// minimum over every critic; each SUNRISE agent uses its own critic.
    pub fn target_subset(&self) -> usize {
        match self.variant {
            Variant::Redq | Variant::Sbr => self.m,
            Variant::Sac | Variant::Droq => self.n,
            Variant::Sunrise | Variant::SunriseDroq => 1,
        }
    }

    pub fn entropy_target(&self, design_dim: usize) -> f64 {
        self.target_entropy.unwrap_or(-(design_dim as f64))
    }
}

/// Dropout plus layer normalisation on the critics, two critics, and the
/// target minimum taken over all of them.
pub fn droq_configure(cfg: AgentConfig, p: f64) -> AgentConfig {
    AgentConfig { dropout: p, layer_norm: true, n: 2, m: 2, ..cfg }
}
