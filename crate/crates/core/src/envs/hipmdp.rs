use super::DesignProblem;
use crate::error::{invalid, shape_err, Result};
use crate::numkit::logsumexp_unchecked;
use crate::prob::RngState;

/// State of one episode: the contrastive parameter set, the running
/// log-likelihood of the history under each member, and the history itself.
#[derive(Clone, Debug, PartialEq)]
pub struct EpisodeState {
    step: usize,
    horizon: usize,
    theta_dim: usize,
    design_dim: usize,
    thetas: Vec<f64>,
    log_c: Vec<f64>,
    log_total: f64,
    actions: Vec<f64>,
    designs: Vec<f64>,
    outcomes: Vec<f64>,
    scratch: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub reward: f64,
    pub outcome: f64,
    pub design: Vec<f64>,
    pub done: bool,
}

impl EpisodeState {
    /// Episode over a given parameter set; row 0 is the true parameter.
    pub fn from_thetas<P: DesignProblem + ?Sized>(problem: &P, thetas: Vec<f64>) -> Result<Self> {
        let td = problem.theta_dim();
        if thetas.is_empty() || thetas.len() % td != 0 {
            return shape_err(format!("parameter set of {} values is not a multiple of {td}", thetas.len()));
        }
        let n = thetas.len() / td;
        Ok(Self {
            step: 0,
            horizon: problem.horizon(),
            theta_dim: td,
            design_dim: problem.design_dim(),
            thetas,
            log_c: vec![0.0; n],
            log_total: (n as f64).ln(),
            actions: Vec::new(),
            designs: Vec::new(),
            outcomes: Vec::new(),
            scratch: vec![0.0; n],
        })
    }

    pub fn step_index(&self) -> usize {
        self.step
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_done(&self) -> bool {
        self.step >= self.horizon
    }

    /// Number of contrastive parameters, excluding the true one.
    pub fn contrastive_count(&self) -> usize {
        self.log_c.len() - 1
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }

    pub fn true_theta(&self) -> &[f64] {
        &self.thetas[..self.theta_dim]
    }

    pub fn log_c(&self) -> &[f64] {
        &self.log_c
    }

    /// Raw actions in `[-1, 1]`, one row per step.
    pub fn actions(&self) -> &[f64] {
        &self.actions
    }

    /// Designs in problem coordinates, one row per step.
    pub fn designs(&self) -> &[f64] {
        &self.designs
    }

    pub fn outcomes(&self) -> &[f64] {
        &self.outcomes
    }

    pub fn last_outcome(&self) -> Option<f64> {
        self.outcomes.last().copied()
    }

    pub fn design_dim(&self) -> usize {
        self.design_dim
    }
}

/// Draws `L + 1` prior parameters; the first is the one generating outcomes.
pub fn env_reset<P: DesignProblem + ?Sized>(problem: &P, l: usize, rng: &mut RngState) -> Result<EpisodeState> {
    if l == 0 {
        return invalid("episode needs at least one contrastive parameter");
    }
    let td = problem.theta_dim();
    let mut thetas = vec![0.0; (l + 1) * td];
    for theta in thetas.chunks_exact_mut(td) {
        problem.sample_prior(rng, theta);
    }
    EpisodeState::from_thetas(problem, thetas)
}

/// Applies one raw action and returns the incremental lower-bound reward.
pub fn env_step<P: DesignProblem + ?Sized>(
    problem: &P,
    state: &mut EpisodeState,
    action: &[f64],
    rng: &mut RngState,
) -> Result<StepResult> {
    if state.is_done() {
        return invalid(format!("episode already finished after {} steps", state.step));
    }
    if action.len() != state.design_dim {
        return shape_err(format!("action has {} entries, expected {}", action.len(), state.design_dim));
    }
    if action.iter().any(|a| !a.is_finite()) {
        return invalid("action is not finite");
    }
    let clamped: Vec<f64> = action.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
    let mut design = vec![0.0; state.design_dim];
    problem.scale_action(&clamped, &mut design);
    let y = problem.simulate(state.true_theta(), &design, rng)?;
    problem.log_lik_batch(y, &state.thetas, &design, &mut state.scratch)?;
    for (c, ll) in state.log_c.iter_mut().zip(&state.scratch) {
        *c += ll;
    }
    let total = logsumexp_unchecked(&state.log_c);
    let reward = state.scratch[0] - total + state.log_total;
    if !reward.is_finite() {
        return invalid(format!("non-finite reward at step {}", state.step));
    }
    state.log_total = total;
    state.actions.extend_from_slice(&clamped);
    state.designs.extend_from_slice(&design);
    state.outcomes.push(y);
    state.step += 1;
    Ok(StepResult { reward, outcome: y, design, done: state.is_done() })
}

/// History log-likelihood under each parameter row, recomputed from scratch.
pub fn recompute_log_c<P: DesignProblem + ?Sized>(
    problem: &P,
    thetas: &[f64],
    designs: &[f64],
    outcomes: &[f64],
) -> Result<Vec<f64>> {
    let td = problem.theta_dim();
    let dd = problem.design_dim();
    if designs.len() != outcomes.len() * dd {
        return shape_err("designs and outcomes disagree in length");
    }
    let mut out = Vec::with_capacity(thetas.len() / td);
    for theta in thetas.chunks_exact(td) {
        let mut total = 0.0;
        for (xi, y) in designs.chunks_exact(dd).zip(outcomes) {
            total += problem.log_lik(*y, theta, xi)?;
        }
        out.push(total);
    }
    Ok(out)
}

/// `log p(h | theta_0) - log sum_l p(h | theta_l) + ln(L + 1)` evaluated directly.
pub fn direct_spce_integrand<P: DesignProblem + ?Sized>(
    problem: &P,
    thetas: &[f64],
    designs: &[f64],
    outcomes: &[f64],
) -> Result<f64> {
    let log_c = recompute_log_c(problem, thetas, designs, outcomes)?;
    Ok(log_c[0] - logsumexp_unchecked(&log_c) + (log_c.len() as f64).ln())
}
