use std::collections::HashMap;

use crate::error::{invalid, shape_err, Result};
use crate::prob::RngState;

/// One environment step. The history prefix is kept once per episode by the
/// buffer: transition `t` of an episode sees that episode's first `t` pairs,
/// and its own `(action, next_outcome)` pair is pair `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct Transition {
    pub episode: u64,
    pub step: usize,
    /// Raw action in `[-1, 1]^d`.
    pub action: Vec<f64>,
    pub reward: f64,
    /// Scaled outcome observed after the action.
    pub next_outcome: f64,
    pub done: bool,
}

#[derive(Clone, Debug, Default, PartialEq)]
struct EpisodeRows {
    rows: Vec<f64>,
    refs: usize,
}

/// Ring buffer of transitions with uniform sampling (with replacement).
#[derive(Clone, Debug, PartialEq)]
pub struct ReplayBuffer {
    capacity: usize,
    pair_width: usize,
    items: Vec<Transition>,
    cursor: usize,
    episodes: HashMap<u64, EpisodeRows>,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, pair_width: usize) -> Result<Self> {
        if capacity == 0 || pair_width < 2 {
            return invalid("buffer needs capacity >= 1 and pair width >= 2");
        }
        Ok(Self { capacity, pair_width, items: Vec::new(), cursor: 0, episodes: HashMap::new() })
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn pair_width(&self) -> usize {
        self.pair_width
    }

    /// Transitions of an episode must arrive in step order.
    pub fn push(&mut self, t: Transition) -> Result<()> {
        if t.action.len() + 1 != self.pair_width {
            return shape_err(format!("action of {} values for pair width {}", t.action.len(), self.pair_width));
        }
        if t.action.iter().any(|a| !(-1.0..=1.0).contains(a)) || !t.reward.is_finite() || !t.next_outcome.is_finite() {
            return invalid("transition has an out-of-range action or non-finite values");
        }
        let ep = self.episodes.entry(t.episode).or_default();
        if ep.rows.len() != t.step * self.pair_width {
            return invalid(format!(
                "episode {} holds {} steps, cannot append step {}",
                t.episode,
                ep.rows.len() / self.pair_width,
                t.step
            ));
        }
        ep.rows.extend_from_slice(&t.action);
        ep.rows.push(t.next_outcome);
        ep.refs += 1;
        if self.items.len() < self.capacity {
            self.items.push(t);
        } else {
            let old = std::mem::replace(&mut self.items[self.cursor], t);
            self.release(&old);
        }
        self.cursor = (self.cursor + 1) % self.capacity;
        Ok(())
    }

    fn release(&mut self, old: &Transition) {
        if let Some(ep) = self.episodes.get_mut(&old.episode) {
            ep.refs -= 1;
            if ep.refs == 0 {
                self.episodes.remove(&old.episode);
            }
        }
    }

    pub fn get(&self, index: usize) -> &Transition {
        &self.items[index]
    }

    /// Pairs `0..=t.step` of the transition's episode, row-major. The first
    /// `t.step` rows are the history before the action.
    pub fn episode_rows(&self, t: &Transition) -> &[f64] {
        &self.episodes[&t.episode].rows[..(t.step + 1) * self.pair_width]
    }

    pub fn prefix(&self, t: &Transition) -> &[f64] {
        &self.episodes[&t.episode].rows[..t.step * self.pair_width]
    }

    pub fn sample_indices(&self, batch: usize, rng: &mut RngState) -> Result<Vec<usize>> {
        if self.items.is_empty() {
            return invalid("cannot sample from an empty replay buffer");
        }
        Ok((0..batch).map(|_| rng.index(self.items.len())).collect())
    }

    pub fn sample(&self, batch: usize, rng: &mut RngState) -> Result<Vec<&Transition>> {
        Ok(self.sample_indices(batch, rng)?.into_iter().map(|i| &self.items[i]).collect())
    }

    #[cfg(test)]
    fn stored_episodes(&self) -> usize {
        self.episodes.len()
    }
}
