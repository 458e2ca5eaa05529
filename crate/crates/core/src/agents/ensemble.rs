use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::buffer::{ReplayBuffer, Transition};
use super::config::AgentConfig;
use super::member::{bellman, sample_next, EncodedBatch, LearnStats, Member};
use crate::bounds::DesignPolicy;
use crate::error::{invalid, Error, Result};
use crate::numkit::{sigmoid, Matrix};
use crate::policy::{EmitMode, HistorySummary};
use crate::prob::{RngState, TanhNormal};

/// Stream index of the member initialisation for reset generation `g`.
pub const INIT_STREAM_BASE: u64 = 100;

/// The agents being trained: one member for SAC/REDQ/DroQ/SBR, `N` for SUNRISE.
#[derive(Clone, Debug, PartialEq)]
pub struct AgentEnsemble {
    pub cfg: AgentConfig,
    pub seed: u64,
    pub design_dim: usize,
    pub members: Vec<Member>,
    pub grad_steps: u64,
    pub next_reset: Option<u64>,
    pub resets: u64,
}

/// Averages over the members and the `G` inner steps of one update call.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct UpdateStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
    pub steps: usize,
}

impl UpdateStats {
    fn add(&mut self, s: &LearnStats) {
        self.critic_loss += s.critic_loss;
        self.actor_loss += s.actor_loss;
        self.alpha += s.alpha;
        self.entropy += s.entropy;
        self.steps += 1;
    }

    fn finish(mut self) -> Self {
        if self.steps > 0 {
            let k = self.steps as f64;
            self.critic_loss /= k;
            self.actor_loss /= k;
            self.alpha /= k;
            self.entropy /= k;
        }
        self
    }

    pub fn is_finite(&self) -> bool {
        self.critic_loss.is_finite() && self.actor_loss.is_finite() && self.alpha.is_finite()
    }
}

impl AgentEnsemble {
    pub fn new(cfg: AgentConfig, design_dim: usize, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let members = (0..cfg.members()).map(|i| Member::init(&cfg, design_dim, &mut init_stream(seed, 0, i))).collect::<Result<_>>()?;
        Ok(Self { next_reset: cfg.reset_interval, cfg, seed, design_dim, members, grad_steps: 0, resets: 0 })
    }

    pub fn summary_width(&self) -> usize {
        self.members[0].policy.summary_width()
    }

    pub fn start(&self) -> Vec<HistorySummary> {
        self.members.iter().map(|m| HistorySummary::zero(m.policy.summary_width())).collect()
    }

    /// Folds one `(action, scaled outcome)` pair into each member's summary.
    pub fn observe(&self, cursor: &mut [HistorySummary], action: &[f64], y_scaled: f64) -> Result<()> {
        for (m, s) in self.members.iter().zip(cursor) {
            m.policy.summary_update(s, action, &[y_scaled])?;
        }
        Ok(())
    }

    /// Training-time action: UCB over member proposals for SUNRISE, a
    /// policy sample otherwise.
    pub fn act(&self, cursor: &[HistorySummary], rng: &mut RngState) -> Result<Vec<f64>> {
        if self.cfg.variant.is_sunrise() {
            sunrise_ucb_action(self, cursor, self.cfg.ucb_lambda, rng)
        } else {
            Ok(self.members[0].policy.emit_design(&cursor[0].b, EmitMode::Sample, rng)?.0)
        }
    }

    /// `G` gradient steps on fresh minibatches.
    pub fn update_step(&mut self, buffer: &ReplayBuffer, rng: &mut RngState) -> Result<UpdateStats> {
        if buffer.len() < self.cfg.batch_size {
            return invalid(format!("buffer holds {} transitions, batch needs {}", buffer.len(), self.cfg.batch_size));
        }
        let mut stats = UpdateStats::default();
        for _ in 0..self.cfg.utd {
            let batch = buffer.sample(self.cfg.batch_size, rng)?;
            if self.cfg.variant.is_sunrise() {
                for s in sunrise_learn(self, buffer, &batch, rng)? {
                    stats.add(&s);
                }
            } else {
                let m = &mut self.members[0];
                let enc = EncodedBatch::build(&m.policy, buffer, &batch)?;
                let y = m.critic_target(&enc, &batch, &self.cfg, rng)?;
                stats.add(&m.learn(&enc, &batch, &y, None, &self.cfg, rng)?);
            }
            self.grad_steps += 1;
            sbr_maybe_reset(self)?;
        }
        Ok(stats.finish())
    }
}

pub fn init_stream(seed: u64, generation: u64, member: usize) -> RngState {
    RngState::with_stream(seed, INIT_STREAM_BASE + generation).derive(member as u64)
}

/// Reinitialises every network and optimiser once the gradient-step counter
/// reaches the reset threshold, then moves the threshold one interval on.
/// The replay buffer and the temperatures are kept. Returns whether a reset happened.
pub fn sbr_maybe_reset(ens: &mut AgentEnsemble) -> Result<bool> {
    let (Some(threshold), Some(interval)) = (ens.next_reset, ens.cfg.reset_interval) else {
        return Ok(false);
    };
    if ens.grad_steps < threshold {
        return Ok(false);
    }
    ens.resets += 1;
    for (i, m) in ens.members.iter_mut().enumerate() {
        let fresh = Member::init(&ens.cfg, ens.design_dim, &mut init_stream(ens.seed, ens.resets, i))?;
        m.replace_networks(fresh);
    }
    ens.next_reset = Some(threshold + interval);
    Ok(true)
}

/// `sigmoid(-std * delta) + 0.5`.
pub fn sunrise_weight(std: f64, delta: f64) -> f64 {
    sigmoid(-std * delta) + 0.5
}

/// Mean and unbiased standard deviation; the deviation of a single value is 0.
pub(crate) fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Per-member targets and confidence weights for one minibatch.
#[derive(Clone, Debug)]
pub struct SunriseTargets {
    pub encodings: Vec<EncodedBatch>,
    pub targets: Vec<Vec<f64>>,
    pub weights: Vec<Vec<f64>>,
}

/// Member `i` bootstraps from its own target critic at its own next action;
/// the weight uses the spread of every member's target critic at that action.
pub fn sunrise_targets(ens: &AgentEnsemble, buffer: &ReplayBuffer, batch: &[&Transition], rng: &mut RngState) -> Result<SunriseTargets> {
    let encodings = ens.members.iter().map(|m| EncodedBatch::build(&m.policy, buffer, batch)).collect::<Result<Vec<_>>>()?;
    let n = batch.len();
    let mut targets = Vec::with_capacity(ens.members.len());
    let mut weights = Vec::with_capacity(ens.members.len());
    for (i, m) in ens.members.iter().enumerate() {
        let next = sample_next(&m.policy, &encodings[i], rng)?;
        let mut qs = Vec::with_capacity(ens.members.len());
        for (other, enc) in ens.members.iter().zip(&encodings) {
            let input = enc.next.hcat(&next.actions)?;
            qs.push(other.critics[0].target_values(&input, rng)?);
        }
        targets.push(bellman(batch, &qs[i], &next.log_probs, m.alpha(), ens.cfg.gamma));
        let mut w = Vec::with_capacity(n);
        let mut column = vec![0.0; qs.len()];
        for r in 0..n {
            for (c, q) in column.iter_mut().zip(&qs) {
                *c = q[r];
            }
            w.push(sunrise_weight(mean_std(&column).1, ens.cfg.bellman_temp));
        }
        weights.push(w);
    }
    Ok(SunriseTargets { encodings, targets, weights })
}

/// Weighted Bellman backup for every member on a shared minibatch.
pub fn sunrise_learn(ens: &mut AgentEnsemble, buffer: &ReplayBuffer, batch: &[&Transition], rng: &mut RngState) -> Result<Vec<LearnStats>> {
    let t = sunrise_targets(ens, buffer, batch, rng)?;
    let cfg = ens.cfg.clone();
    let mut out = Vec::with_capacity(ens.members.len());
    for (i, m) in ens.members.iter_mut().enumerate() {
        out.push(m.learn(&t.encodings[i], batch, &t.targets[i], Some(&t.weights[i]), &cfg, rng)?);
    }
    Ok(out)
}

/// One `G`-step SUNRISE update; equivalent to [`AgentEnsemble::update_step`]
/// for SUNRISE configurations.
pub fn sunrise_update(ens: &mut AgentEnsemble, buffer: &ReplayBuffer, rng: &mut RngState) -> Result<UpdateStats> {
    if !ens.cfg.variant.is_sunrise() {
        return invalid(format!("{} is not a SUNRISE configuration", ens.cfg.variant));
    }
    ens.update_step(buffer, rng)
}

/// UCB scores `mean_j Q_j([B_j || a]) + lambda * std_j` of a candidate action.
pub fn ucb_score(ens: &AgentEnsemble, cursor: &[HistorySummary], action: &[f64], lambda: f64) -> Result<f64> {
    let mut qs = Vec::with_capacity(ens.members.len());
    for (m, s) in ens.members.iter().zip(cursor) {
        let mut row = s.b.clone();
        row.extend_from_slice(action);
        let input = Matrix::row_vector(&row);
        for c in &m.critics {
            qs.push(c.values(&input)?[0]);
        }
    }
    let (mean, std) = mean_std(&qs);
    Ok(mean + lambda * std)
}

/// Each member proposes a sampled action; the proposal with the highest UCB
/// score is returned (lowest member index on ties).
pub fn sunrise_ucb_action(ens: &AgentEnsemble, cursor: &[HistorySummary], lambda: f64, rng: &mut RngState) -> Result<Vec<f64>> {
    if cursor.len() != ens.members.len() {
        return invalid("one summary per member is required");
    }
    let mut proposals = ens
        .members
        .iter()
        .zip(cursor)
        .map(|(m, s)| Ok(m.policy.emit_design(&s.b, EmitMode::Sample, rng)?.0))
        .collect::<Result<Vec<_>>>()?;
    if proposals.len() == 1 {
        return Ok(proposals.into_iter().next().expect("one proposal"));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (i, a) in proposals.iter().enumerate() {
        let s = ucb_score(ens, cursor, a, lambda)?;
        if s > best_score {
            best = i;
            best_score = s;
        }
    }
    Ok(proposals.swap_remove(best))
}

/// How an ensemble of policies picks a design at evaluation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvalMethod {
    /// Squashed average of the members' pre-squash means.
    A,
    /// Sample from a uniformly chosen member.
    #[default]
    B,
    /// Sample from a Gaussian with averaged means and averaged variances.
    C,
}

impl FromStr for EvalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Self::A),
            "B" => Ok(Self::B),
            "C" => Ok(Self::C),
            other => invalid(format!("unknown evaluation method {other:?}; expected A, B or C")),
        }
    }
}

impl fmt::Display for EvalMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::A => "A",
            Self::B => "B",
            Self::C => "C",
        })
    }
}

/// Gaussian with the members' averaged means and averaged variances.
pub fn averaged_distribution(dists: &[TanhNormal]) -> Result<TanhNormal> {
    let Some(first) = dists.first() else {
        return invalid("no member distributions to average");
    };
    let k = dists.len() as f64;
    let d = first.dim();
    let mut mean = vec![0.0; d];
    let mut var = vec![0.0; d];
    for dist in dists {
        for j in 0..d {
            mean[j] += dist.mean()[j] / k;
            var[j] += (2.0 * dist.log_std()[j]).exp() / k;
        }
    }
    TanhNormal::new(mean, var.iter().map(|v| 0.5 * v.ln()).collect())
}

pub fn sunrise_eval_select(ens: &AgentEnsemble, cursor: &[HistorySummary], method: EvalMethod, rng: &mut RngState) -> Result<Vec<f64>> {
    if cursor.len() != ens.members.len() {
        return invalid("one summary per member is required");
    }
    match method {
        EvalMethod::B => {
            let i = if ens.members.len() == 1 { 0 } else { rng.index(ens.members.len()) };
            Ok(ens.members[i].policy.emit_design(&cursor[i].b, EmitMode::Sample, rng)?.0)
        }
        EvalMethod::A | EvalMethod::C => {
            let dists = ens.members.iter().zip(cursor).map(|(m, s)| m.policy.distribution(&s.b)).collect::<Result<Vec<_>>>()?;
            let avg = averaged_distribution(&dists)?;
            Ok(if method == EvalMethod::A { avg.mode().0 } else { avg.sample(rng).action })
        }
    }
}

/// A trained ensemble used as a design policy.
#[derive(Clone, Copy, Debug)]
pub struct EnsemblePolicy<'a> {
    pub ensemble: &'a AgentEnsemble,
    pub method: EvalMethod,
}

impl DesignPolicy for EnsemblePolicy<'_> {
    type Cursor = Vec<HistorySummary>;

    fn start(&self) -> Vec<HistorySummary> {
        self.ensemble.start()
    }

    fn act(&self, cursor: &Vec<HistorySummary>, rng: &mut RngState) -> Result<Vec<f64>> {
        sunrise_eval_select(self.ensemble, cursor, self.method, rng)
    }

    fn observe(&self, cursor: &mut Vec<HistorySummary>, action: &[f64], y_scaled: f64) -> Result<()> {
        self.ensemble.observe(cursor, action, y_scaled)
    }
}
