use super::buffer::{ReplayBuffer, Transition};
use super::config::AgentConfig;
use super::ensemble::{AgentEnsemble, UpdateStats};
use crate::envs::{env_reset, env_step, DesignProblem};
use crate::error::{Error, Result};
use crate::prob::RngState;

/// One training-curve row, logged when an episode finishes. The episode
/// return equals that episode's sPCE estimate at the training `L`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CurvePoint {
    pub iteration: u64,
    pub spce_train_l: f64,
    pub critic_loss: Option<f64>,
    pub actor_loss: Option<f64>,
    pub alpha: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub ensemble: AgentEnsemble,
    pub curve: Vec<CurvePoint>,
}

/// Stream offsets within a training seed.
const ENV_STREAM: u64 = 1;
const UPDATE_STREAM: u64 = 2;
const ACT_STREAM: u64 = 3;

/// Runs `iterations` environment steps, each followed by one update call
/// once the buffer holds a full batch. `on_point` sees every curve row as
/// it is produced.
pub fn train<P, F>(problem: &P, l_train: usize, cfg: &AgentConfig, seed: u64, iterations: u64, mut on_point: F) -> Result<TrainOutcome>
where
    P: DesignProblem + ?Sized,
    F: FnMut(&CurvePoint),
{
    let mut ensemble = AgentEnsemble::new(cfg.clone(), problem.design_dim(), seed)?;
    let mut buffer = ReplayBuffer::new(cfg.buffer_capacity, problem.design_dim() + problem.outcome_dim())?;
    let mut env_rng = RngState::with_stream(seed, ENV_STREAM);
    let mut update_rng = RngState::with_stream(seed, UPDATE_STREAM);
    let mut act_rng = RngState::with_stream(seed, ACT_STREAM);
    let mut curve = Vec::new();

    let mut episode = 0u64;
    let mut state = env_reset(problem, l_train, &mut env_rng)?;
    let mut cursor = ensemble.start();
    let mut ret = 0.0;
    let mut last: Option<UpdateStats> = None;
    for it in 1..=iterations {
        let action = ensemble.act(&cursor, &mut act_rng)?;
        let step = state.step_index();
        let res = env_step(problem, &mut state, &action, &mut env_rng)?;
        let clamped = &state.actions()[step * problem.design_dim()..];
        let y_scaled = problem.scale_observation(res.outcome);
        buffer.push(Transition {
            episode,
            step,
            action: clamped.to_vec(),
            reward: res.reward,
            next_outcome: y_scaled,
            done: res.done,
        })?;
        ensemble.observe(&mut cursor, clamped, y_scaled)?;
        ret += res.reward;

        if buffer.len() >= cfg.batch_size {
            let stats = ensemble.update_step(&buffer, &mut update_rng)?;
            if !stats.is_finite() {
                return Err(Error::NonFinite(format!("training loss at iteration {it}")));
            }
            last = Some(stats);
        }

        if res.done {
            let point = CurvePoint {
                iteration: it,
                spce_train_l: ret,
                critic_loss: last.map(|s| s.critic_loss),
                actor_loss: last.map(|s| s.actor_loss),
                alpha: ensemble.members.iter().map(|m| m.alpha()).sum::<f64>() / ensemble.members.len() as f64,
            };
            on_point(&point);
            curve.push(point);
            episode += 1;
            state = env_reset(problem, l_train, &mut env_rng)?;
            cursor = ensemble.start();
            ret = 0.0;
        }
    }
    Ok(TrainOutcome { ensemble, curve })
}
