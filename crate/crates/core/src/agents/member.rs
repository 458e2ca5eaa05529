use std::collections::HashMap;

use super::buffer::{ReplayBuffer, Transition};
use super::config::AgentConfig;
use crate::error::{shape_err, Result};
use crate::numkit::{polyak_update, AdamState, ForwardCache, Matrix, Mlp, Mode};
use crate::policy::{ActionBatch, PolicyNet};
use crate::prob::RngState;

/// Online and target Q networks over `[B || action]`, with the online optimiser.
#[derive(Clone, Debug, PartialEq)]
pub struct Critic {
    pub online: Mlp,
    pub target: Mlp,
    pub adam: AdamState,
}

impl Critic {
    pub fn init(cfg: &AgentConfig, input: usize, rng: &mut RngState) -> Result<Self> {
        let online = Mlp::kaiming(Mlp::stack(input, &cfg.critic_hidden, 1, cfg.dropout, cfg.layer_norm), rng)?;
        let adam = AdamState::new(online.param_count(), cfg.critic_lr);
        Ok(Self { target: online.clone(), online, adam })
    }

    /// Target-network values; dropout masks are drawn when present.
    pub fn target_values(&self, input: &Matrix, rng: &mut RngState) -> Result<Vec<f64>> {
        Ok(self.target.forward(input, Mode::Train, Some(rng))?.0.into_vec())
    }

    /// Online values in eval mode.
    pub fn values(&self, input: &Matrix) -> Result<Vec<f64>> {
        Ok(self.online.predict(input)?.into_vec())
    }
}

/// One SAC agent: policy (encoder and emitter), its critics and temperature.
#[derive(Clone, Debug, PartialEq)]
pub struct Member {
    pub policy: PolicyNet,
    pub encoder_adam: AdamState,
    pub emitter_adam: AdamState,
    pub critics: Vec<Critic>,
    pub log_alpha: f64,
    pub alpha_adam: AdamState,
}

/// Loss summary of one gradient step of one member.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct LearnStats {
    pub critic_loss: f64,
    pub actor_loss: f64,
    pub alpha: f64,
    pub entropy: f64,
}

impl Member {
    pub fn init(cfg: &AgentConfig, design_dim: usize, rng: &mut RngState) -> Result<Self> {
        let policy = PolicyNet::init(rng, design_dim, 1, &cfg.policy_widths)?;
        let input = policy.summary_width() + design_dim;
        let critics = (0..cfg.critics_per_member()).map(|_| Critic::init(cfg, input, rng)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            encoder_adam: AdamState::new(policy.encoder().param_count(), cfg.policy_lr),
            emitter_adam: AdamState::new(policy.emitter().param_count(), cfg.policy_lr),
            policy,
            critics,
            log_alpha: cfg.init_alpha.ln(),
            alpha_adam: AdamState::new(1, cfg.alpha_lr),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.log_alpha.exp()
    }

    /// Soft Bellman targets `r + gamma (1 - done) (min_S Q_targ(B', a') - alpha log pi(a'|B'))`
    /// with `a'` drawn from the current policy and `S` a random subset of
    /// `cfg.target_subset()` critics (all of them when the subset is full).
    pub fn critic_target(&self, enc: &EncodedBatch, batch: &[&Transition], cfg: &AgentConfig, rng: &mut RngState) -> Result<Vec<f64>> {
        let next = sample_next(&self.policy, enc, rng)?;
        let n = self.critics.len();
        let m = cfg.target_subset().min(n);
        let subset: Vec<usize> = if m < n { rng.distinct_indices(n, m) } else { (0..n).collect() };
        let input = enc.next.hcat(&next.actions)?;
        let mut min_q = vec![f64::INFINITY; batch.len()];
        for &k in &subset {
            for (mq, q) in min_q.iter_mut().zip(self.critics[k].target_values(&input, rng)?) {
                *mq = mq.min(q);
            }
        }
        Ok(bellman(batch, &min_q, &next.log_probs, self.alpha(), cfg.gamma))
    }

    /// One gradient step on the critics, the policy and the temperature.
    ///
    /// Critic errors are weighted per row when `weights` is given. The
    /// encoder is trained by the critic loss through the critic's summary
    /// input and by the actor loss through the emitted action and its
    /// log-density; the critic's summary input is held fixed for the actor.
    pub fn learn(
        &mut self,
        enc: &EncodedBatch,
        batch: &[&Transition],
        targets: &[f64],
        weights: Option<&[f64]>,
        cfg: &AgentConfig,
        rng: &mut RngState,
    ) -> Result<LearnStats> {
        let n = batch.len();
        if targets.len() != n || weights.is_some_and(|w| w.len() != n) || enc.summaries.rows() != n {
            return shape_err("targets, weights and batch disagree in length");
        }
        let width = self.policy.summary_width();
        let d = self.policy.design_dim();
        let nf = n as f64;
        let mut actions = Matrix::zeros(n, d);
        for (i, t) in batch.iter().enumerate() {
            actions.row_mut(i).copy_from_slice(&t.action);
        }
        let input = enc.summaries.hcat(&actions)?;
        let mut grad_b = Matrix::zeros(n, width);

        let mut critic_loss = 0.0;
        for critic in &mut self.critics {
            let (q, cache) = critic.online.forward(&input, Mode::Train, Some(rng))?;
            let mut g = Matrix::zeros(n, 1);
            let mut loss = 0.0;
            for i in 0..n {
                let w = weights.map_or(1.0, |w| w[i]);
                let diff = q.data()[i] - targets[i];
                loss += w * diff * diff;
                g.data_mut()[i] = 2.0 * w * diff / nf;
            }
            critic_loss += loss / nf;
            let mut grads = vec![0.0; critic.online.param_count()];
            let dx = critic.online.backward_into(&cache, &g, &mut grads, true)?.expect("input gradient requested");
            grad_b.add_assign(&dx.columns(0, width))?;
            critic.adam.step(critic.online.params_mut(), &grads)?;
            polyak_update(critic.target.params_mut(), critic.online.params(), cfg.tau)?;
        }
        critic_loss /= self.critics.len() as f64;

        let alpha = self.alpha();
        let actor = self.actor_gradients(&enc.summaries, rng)?;
        grad_b.add_assign(&actor.summaries)?;
        let mean_lp = actor.mean_log_prob;
        let emitter_grads = actor.emitter;

        let mut encoder_grads = vec![0.0; self.policy.encoder().param_count()];
        enc.backward(self.policy.encoder(), &grad_b, &mut encoder_grads)?;
        self.encoder_adam.step(self.policy.encoder_mut().params_mut(), &encoder_grads)?;
        self.emitter_adam.step(self.policy.emitter_mut().params_mut(), &emitter_grads)?;

        let target_entropy = cfg.entropy_target(d);
        let alpha_grad = -alpha * (mean_lp + target_entropy);
        let mut la = [self.log_alpha];
        self.alpha_adam.step(&mut la, &[alpha_grad])?;
        self.log_alpha = la[0];

        Ok(LearnStats { critic_loss, actor_loss: actor.loss, alpha: self.alpha(), entropy: -mean_lp })
    }

    /// Gradients of `mean(alpha log pi(a|B) - mean_k Q_k(B, a))` over
    /// reparameterised actions. The summaries receive only the policy path.
    pub(crate) fn actor_gradients(&self, summaries: &Matrix, rng: &mut RngState) -> Result<ActorGradients> {
        let n = summaries.rows();
        let nf = n as f64;
        let width = self.policy.summary_width();
        let d = self.policy.design_dim();
        let k = self.critics.len() as f64;
        let alpha = self.alpha();
        let sampled = self.policy.sample_batch(summaries, rng)?;
        let input = summaries.hcat(&sampled.actions)?;
        let g = Matrix::from_vec(n, 1, vec![-1.0 / (k * nf); n])?;
        let mut grad_actions = Matrix::zeros(n, d);
        let mut q_sum = 0.0;
        for critic in &self.critics {
            let (q, cache) = critic.online.forward(&input, Mode::Train, Some(rng))?;
            q_sum += q.data().iter().sum::<f64>();
            let mut scratch = vec![0.0; critic.online.param_count()];
            let dx = critic.online.backward_into(&cache, &g, &mut scratch, true)?.expect("input gradient requested");
            grad_actions.add_assign(&dx.columns(width, width + d))?;
        }
        let mean_log_prob = sampled.log_probs.iter().sum::<f64>() / nf;
        let loss = alpha * mean_log_prob - q_sum / (k * nf);
        let mut emitter = vec![0.0; self.policy.emitter().param_count()];
        let summaries = self.policy.backward_batch(&sampled, &grad_actions, &vec![alpha / nf; n], &mut emitter)?;
        Ok(ActorGradients { loss, mean_log_prob, summaries, emitter })
    }

    /// Copies every parameter and optimiser state, leaving the temperature untouched.
    pub(crate) fn replace_networks(&mut self, fresh: Member) {
        self.policy = fresh.policy;
        self.encoder_adam = fresh.encoder_adam;
        self.emitter_adam = fresh.emitter_adam;
        self.critics = fresh.critics;
    }
}

pub(crate) struct ActorGradients {
    pub loss: f64,
    pub mean_log_prob: f64,
    pub summaries: Matrix,
    pub emitter: Vec<f64>,
}

pub(crate) fn bellman(batch: &[&Transition], next_q: &[f64], next_log_probs: &[f64], alpha: f64, gamma: f64) -> Vec<f64> {
    batch
        .iter()
        .zip(next_q.iter().zip(next_log_probs))
        .map(|(t, (q, lp))| {
            if t.done || gamma == 0.0 {
                t.reward
            } else {
                t.reward + gamma * (q - alpha * lp)
            }
        })
        .collect()
}

/// Summaries of a minibatch recomputed with the current encoder.
///
/// Every distinct episode in the batch is encoded once up to the longest
/// prefix needed; `B_t` and `B_{t+1}` are prefix sums of the encoded rows.
#[derive(Clone, Debug)]
pub struct EncodedBatch {
    /// `B_t` per batch row.
    pub summaries: Matrix,
    /// `B_{t+1}` per batch row.
    pub next: Matrix,
    cache: Option<ForwardCache>,
    rows: usize,
    /// Row offset of each batch item's episode and its step index.
    index: Vec<(usize, usize)>,
    /// `(offset, length)` of each episode block.
    blocks: Vec<(usize, usize)>,
}

impl EncodedBatch {
    pub fn build(policy: &PolicyNet, buffer: &ReplayBuffer, batch: &[&Transition]) -> Result<Self> {
        let pw = policy.pair_width();
        if buffer.pair_width() != pw {
            return shape_err("replay pair width does not match the policy");
        }
        let mut order: Vec<u64> = Vec::new();
        let mut longest: HashMap<u64, (usize, usize)> = HashMap::new();
        for (j, t) in batch.iter().enumerate() {
            let e = longest.entry(t.episode).or_insert_with(|| {
                order.push(t.episode);
                (j, t.step)
            });
            if t.step > e.1 {
                *e = (j, t.step);
            }
        }
        let mut data = Vec::new();
        let mut offsets = HashMap::new();
        let mut blocks = Vec::with_capacity(order.len());
        for ep in &order {
            let (j, step) = longest[ep];
            let start = data.len() / pw;
            data.extend_from_slice(buffer.episode_rows(batch[j]));
            offsets.insert(*ep, start);
            blocks.push((start, step + 1));
        }
        let rows = data.len() / pw;
        let width = policy.summary_width();
        let (enc, cache) = policy.encoder().forward(&Matrix::from_vec(rows, pw, data)?, Mode::Train, None)?;
        let mut prefix = Matrix::zeros(rows + order.len(), width);
        // Block k occupies prefix rows offset + k .. offset + k + len + 1.
        for (k, &(start, len)) in blocks.iter().enumerate() {
            let base = start + k;
            for r in 0..len {
                let (head, tail) = prefix.data_mut().split_at_mut((base + r + 1) * width);
                let prev = &head[(base + r) * width..];
                for ((dst, p), e) in tail[..width].iter_mut().zip(prev).zip(enc.row(start + r)) {
                    *dst = p + e;
                }
            }
        }
        let block_of: HashMap<u64, usize> = order.iter().enumerate().map(|(k, e)| (*e, k)).collect();
        let n = batch.len();
        let mut summaries = Matrix::zeros(n, width);
        let mut next = Matrix::zeros(n, width);
        let mut index = Vec::with_capacity(n);
        for (j, t) in batch.iter().enumerate() {
            let k = block_of[&t.episode];
            let base = offsets[&t.episode] + k;
            summaries.row_mut(j).copy_from_slice(prefix.row(base + t.step));
            next.row_mut(j).copy_from_slice(prefix.row(base + t.step + 1));
            index.push((offsets[&t.episode], t.step));
        }
        Ok(Self { summaries, next, cache: Some(cache), rows, index, blocks })
    }

    /// Number of encoder rows evaluated.
    pub fn encoded_rows(&self) -> usize {
        self.rows
    }

    /// Accumulates encoder gradients given `dL/dB_t` per batch row.
    pub fn backward(&self, encoder: &Mlp, grad_summaries: &Matrix, grads: &mut [f64]) -> Result<()> {
        let width = encoder.output_width();
        if grad_summaries.rows() != self.index.len() || grad_summaries.cols() != width {
            return shape_err("summary gradient does not match the batch");
        }
        let Some(cache) = &self.cache else { return Ok(()) };
        let mut g = Matrix::zeros(self.rows, width);
        for (j, &(offset, step)) in self.index.iter().enumerate() {
            if step == 0 {
                continue;
            }
            for (dst, v) in g.row_mut(offset + step - 1).iter_mut().zip(grad_summaries.row(j)) {
                *dst += v;
            }
        }
        // Row r contributes to every B_t with t > r.
        for &(start, len) in &self.blocks {
            for r in (start..start + len - 1).rev() {
                let (head, tail) = g.data_mut().split_at_mut((r + 1) * width);
                for (dst, v) in head[r * width..].iter_mut().zip(&tail[..width]) {
                    *dst += v;
                }
            }
        }
        encoder.backward_into(cache, &g, grads, false)?;
        Ok(())
    }
}

/// Next-state actions drawn from the current policy.
pub(crate) fn sample_next(policy: &PolicyNet, enc: &EncodedBatch, rng: &mut RngState) -> Result<ActionBatch> {
    policy.sample_batch(&enc.next, rng)
}
