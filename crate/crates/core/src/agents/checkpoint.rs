use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::config::AgentConfig;
use super::ensemble::AgentEnsemble;
use super::member::Member;
use crate::error::{Error, Result};
use crate::numkit::{AdamState, Mlp};
use crate::prob::RngState;

pub const CHECKPOINT_FORMAT: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedAdam {
    pub name: String,
    pub state: AdamState,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MemberSnapshot {
    pub tensors: Vec<Tensor>,
    pub optimizers: Vec<NamedAdam>,
    pub log_alpha: f64,
}

/// Serializable state of an [`AgentEnsemble`]; the replay buffer is not included.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: u32,
    pub config: AgentConfig,
    pub seed: u64,
    pub design_dim: usize,
    pub grad_steps: u64,
    pub next_reset: Option<u64>,
    pub resets: u64,
    pub members: Vec<MemberSnapshot>,
}

fn networks(m: &Member) -> Vec<(String, &Mlp)> {
    let mut out = vec![("policy.encoder".to_string(), m.policy.encoder()), ("policy.emitter".to_string(), m.policy.emitter())];
    for (k, c) in m.critics.iter().enumerate() {
        out.push((format!("critic{k}.online"), &c.online));
        out.push((format!("critic{k}.target"), &c.target));
    }
    out
}

fn fill(prefix: &str, net: &mut Mlp, tensors: &HashMap<&str, &Tensor>) -> Result<usize> {
    let slots = net.param_slots();
    for slot in &slots {
        let name = format!("{prefix}.{}", slot.name);
        let t = tensors.get(name.as_str()).ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.shape != slot.shape || t.data.len() != slot.range.len() {
            return Err(Error::Checkpoint(format!("tensor {name} has shape {:?}, expected {:?}", t.shape, slot.shape)));
        }
        net.params_mut()[slot.range.clone()].copy_from_slice(&t.data);
    }
    Ok(slots.len())
}

fn optimizers(m: &Member) -> Vec<(String, &AdamState)> {
    let mut out = vec![("policy.encoder".to_string(), &m.encoder_adam), ("policy.emitter".to_string(), &m.emitter_adam)];
    for (k, c) in m.critics.iter().enumerate() {
        out.push((format!("critic{k}"), &c.adam));
    }
    out.push(("alpha".to_string(), &m.alpha_adam));
    out
}

fn snapshot_member(m: &Member) -> MemberSnapshot {
    let mut tensors = Vec::new();
    for (prefix, net) in networks(m) {
        for slot in net.param_slots() {
            tensors.push(Tensor {
                name: format!("{prefix}.{}", slot.name),
                shape: slot.shape,
                data: net.params()[slot.range].to_vec(),
            });
        }
    }
    let optimizers = optimizers(m).into_iter().map(|(name, s)| NamedAdam { name, state: s.clone() }).collect();
    MemberSnapshot { tensors, optimizers, log_alpha: m.log_alpha }
}

fn restore_member(m: &mut Member, snap: &MemberSnapshot) -> Result<()> {
    let tensors: HashMap<&str, &Tensor> = snap.tensors.iter().map(|t| (t.name.as_str(), t)).collect();
    let mut used = fill("policy.encoder", m.policy.encoder_mut(), &tensors)?;
    used += fill("policy.emitter", m.policy.emitter_mut(), &tensors)?;
    for (k, c) in m.critics.iter_mut().enumerate() {
        used += fill(&format!("critic{k}.online"), &mut c.online, &tensors)?;
        used += fill(&format!("critic{k}.target"), &mut c.target, &tensors)?;
    }
    if used != tensors.len() {
        return Err(Error::Checkpoint(format!("checkpoint holds {} unexpected tensors", tensors.len() - used)));
    }
    let states: HashMap<&str, &AdamState> = snap.optimizers.iter().map(|o| (o.name.as_str(), &o.state)).collect();
    if states.len() != optimizers(m).len() {
        return Err(Error::Checkpoint("optimizer set does not match the configuration".into()));
    }
    let fetch = |name: &str, dst: &mut AdamState| -> Result<()> {
        let s = states.get(name).ok_or_else(|| Error::Checkpoint(format!("missing optimizer {name}")))?;
        if s.len() != dst.len() {
            return Err(Error::Checkpoint(format!("optimizer {name} holds {} entries, expected {}", s.len(), dst.len())));
        }
        *dst = (*s).clone();
        Ok(())
    };
    fetch("policy.encoder", &mut m.encoder_adam)?;
    fetch("policy.emitter", &mut m.emitter_adam)?;
    for (k, c) in m.critics.iter_mut().enumerate() {
        fetch(&format!("critic{k}"), &mut c.adam)?;
    }
    fetch("alpha", &mut m.alpha_adam)?;
    m.log_alpha = snap.log_alpha;
    Ok(())
}

impl Checkpoint {
    pub fn capture(ens: &AgentEnsemble) -> Self {
        Self {
            format: CHECKPOINT_FORMAT,
            config: ens.cfg.clone(),
            seed: ens.seed,
            design_dim: ens.design_dim,
            grad_steps: ens.grad_steps,
            next_reset: ens.next_reset,
            resets: ens.resets,
            members: ens.members.iter().map(snapshot_member).collect(),
        }
    }

    pub fn restore(&self) -> Result<AgentEnsemble> {
        if self.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!("unsupported checkpoint format {}", self.format)));
        }
        self.config.validate()?;
        if self.members.len() != self.config.members() {
            return Err(Error::Checkpoint(format!(
                "{} member snapshots for a configuration with {}",
                self.members.len(),
                self.config.members()
            )));
        }
        let mut members = Vec::with_capacity(self.members.len());
        for snap in &self.members {
            let mut m = Member::init(&self.config, self.design_dim, &mut RngState::new(0))?;
            restore_member(&mut m, snap)?;
            members.push(m);
        }
        Ok(AgentEnsemble {
            cfg: self.config.clone(),
            seed: self.seed,
            design_dim: self.design_dim,
            members,
            grad_steps: self.grad_steps,
            next_reset: self.next_reset,
            resets: self.resets,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
