//! Rollouts and contrastive bound estimation.
//!
//! Rollout `i` of an evaluation with seed `s` draws its true parameter, its
//! designs and its outcomes from stream `(s, 2i)`, and its contrastive
//! parameters from stream `(s, 2i + 1)`. The contrastive set is consumed in
//! chunks with running log-sum-exp accumulators, one per step, so the
//! estimate does not depend on the chunk size.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::envs::DesignProblem;
use crate::error::{invalid, shape_err, Result};
use crate::numkit::LogSumExp;
use crate::policy::{EmitMode, HistorySummary, PolicyNet};
use crate::prob::RngState;

/// Something that picks raw actions in `[-1, 1]^d` from the history so far.
pub trait DesignPolicy {
    type Cursor;

    fn start(&self) -> Self::Cursor;
    fn act(&self, cursor: &Self::Cursor, rng: &mut RngState) -> Result<Vec<f64>>;
    fn observe(&self, cursor: &mut Self::Cursor, action: &[f64], y_scaled: f64) -> Result<()>;
}

/// Uniform designs over the design box.
#[derive(Clone, Copy, Debug)]
pub struct RandomDesigns {
    pub dim: usize,
}

impl DesignPolicy for RandomDesigns {
    type Cursor = ();

    fn start(&self) {}

    fn act(&self, _: &(), rng: &mut RngState) -> Result<Vec<f64>> {
        Ok((0..self.dim).map(|_| rng.uniform_range(-1.0, 1.0)).collect())
    }

    fn observe(&self, _: &mut (), _: &[f64], _: f64) -> Result<()> {
        Ok(())
    }
}

/// A trained policy network driven in sample or mean mode.
#[derive(Clone, Copy, Debug)]
pub struct NetPolicy<'a> {
    pub net: &'a PolicyNet,
    pub mode: EmitMode,
}

impl DesignPolicy for NetPolicy<'_> {
    type Cursor = HistorySummary;

    fn start(&self) -> HistorySummary {
        HistorySummary::zero(self.net.summary_width())
    }

    fn act(&self, cursor: &HistorySummary, rng: &mut RngState) -> Result<Vec<f64>> {
        Ok(self.net.emit_design(&cursor.b, self.mode, rng)?.0)
    }

    fn observe(&self, cursor: &mut HistorySummary, action: &[f64], y_scaled: f64) -> Result<()> {
        self.net.summary_update(cursor, action, &[y_scaled])
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RolloutTrace {
    pub rollout_id: usize,
    pub seed: u64,
    pub theta0: Vec<f64>,
    /// Raw actions in `[-1, 1]`, one row per step.
    pub actions: Vec<f64>,
    /// Designs in problem coordinates, one row per step.
    pub designs: Vec<f64>,
    pub outcomes: Vec<f64>,
}

impl RolloutTrace {
    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }
}

/// Runs one episode of `horizon` steps without any contrastive bookkeeping.
pub fn rollout<P, D>(policy: &D, problem: &P, horizon: usize, rng: &mut RngState) -> Result<RolloutTrace>
where
    P: DesignProblem + ?Sized,
    D: DesignPolicy + ?Sized,
{
    let dd = problem.design_dim();
    let mut theta0 = vec![0.0; problem.theta_dim()];
    problem.sample_prior(rng, &mut theta0);
    let mut cursor = policy.start();
    let mut trace = RolloutTrace {
        rollout_id: 0,
        seed: rng.seed(),
        theta0,
        actions: Vec::with_capacity(horizon * dd),
        designs: Vec::with_capacity(horizon * dd),
        outcomes: Vec::with_capacity(horizon),
    };
    let mut design = vec![0.0; dd];
    for _ in 0..horizon {
        let raw = policy.act(&cursor, rng)?;
        if raw.len() != dd {
            return shape_err(format!("policy emitted {} values for a {dd}-dimensional design", raw.len()));
        }
        let action: Vec<f64> = raw.iter().map(|a| a.clamp(-1.0, 1.0)).collect();
        problem.scale_action(&action, &mut design);
        let y = problem.simulate(&trace.theta0, &design, rng)?;
        policy.observe(&mut cursor, &action, problem.scale_observation(y))?;
        trace.actions.extend_from_slice(&action);
        trace.designs.extend_from_slice(&design);
        trace.outcomes.push(y);
    }
    Ok(trace)
}

/// Total history log-likelihood of a trace under each parameter row.
pub fn contrastive_loglik_matrix<P: DesignProblem + ?Sized>(
    problem: &P,
    trace: &RolloutTrace,
    thetas: &[f64],
) -> Result<Vec<f64>> {
    let td = problem.theta_dim();
    if thetas.len() % td != 0 {
        return shape_err(format!("{} parameter values is not a multiple of {td}", thetas.len()));
    }
    let mut totals = vec![0.0; thetas.len() / td];
    let mut step = vec![0.0; totals.len()];
    let dd = problem.design_dim();
    for (xi, y) in trace.designs.chunks_exact(dd).zip(&trace.outcomes) {
        problem.log_lik_batch(*y, thetas, xi, &mut step)?;
        for (t, s) in totals.iter_mut().zip(&step) {
            *t += s;
        }
    }
    Ok(totals)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BoundKind {
    #[serde(rename = "sPCE")]
    Spce,
    #[serde(rename = "sNMC")]
    Snmc,
}

impl fmt::Display for BoundKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BoundKind::Spce => "sPCE",
            BoundKind::Snmc => "sNMC",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundEstimate {
    pub kind: BoundKind,
    pub mean: f64,
    pub stderr: f64,
    pub n: usize,
    #[serde(rename = "L")]
    pub l: usize,
    #[serde(rename = "T")]
    pub horizon: usize,
    #[serde(skip)]
    pub values: Vec<f64>,
}

/// Sample mean and standard error (`sd / sqrt(n)` with the `n - 1` variance).
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl BoundEstimate {
    pub fn from_values(kind: BoundKind, l: usize, horizon: usize, values: Vec<f64>) -> Self {
        let (mean, stderr) = mean_stderr(&values);
        Self { kind, mean, stderr, n: values.len(), l, horizon, values }
    }

    /// Pools per-rollout values across several estimates of the same kind.
    pub fn pooled(parts: &[BoundEstimate]) -> Result<Self> {
        let first = parts.first().ok_or_else(|| crate::Error::InvalidArgument("nothing to pool".into()))?;
        if parts.iter().any(|p| p.kind != first.kind || p.l != first.l || p.horizon != first.horizon) {
            return invalid("cannot pool estimates of different kinds, L or T");
        }
        let values = parts.iter().flat_map(|p| p.values.iter().copied()).collect();
        Ok(Self::from_values(first.kind, first.l, first.horizon, values))
    }
}

/// Per-rollout bound values at every step, on one contrastive set.
#[derive(Clone, Debug, PartialEq)]
pub struct RolloutBounds {
    pub trace: RolloutTrace,
    /// Cumulative sPCE after each step; its increments are the step rewards.
    pub spce: Vec<f64>,
    pub snmc: Vec<f64>,
}

impl RolloutBounds {
    pub fn rewards(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.spce
            .iter()
            .map(|g| {
                let r = g - prev;
                prev = *g;
                r
            })
            .collect()
    }

    pub fn final_spce(&self) -> f64 {
        self.spce.last().copied().unwrap_or(0.0)
    }

    pub fn final_snmc(&self) -> f64 {
        self.snmc.last().copied().unwrap_or(0.0)
    }
}

/// Both bounds for one trace, drawing `l` contrastive parameters from `rng`
/// in chunks of `chunk` rows.
pub fn bound_trace<P: DesignProblem + ?Sized>(
    problem: &P,
    trace: RolloutTrace,
    l: usize,
    chunk: usize,
    rng: &mut RngState,
) -> Result<RolloutBounds> {
    if l == 0 || chunk == 0 {
        return invalid("L and chunk size must be >= 1");
    }
    let td = problem.theta_dim();
    let dd = problem.design_dim();
    let steps = trace.steps();
    let own = contrastive_prefix(problem, &trace, &trace.theta0)?;
    let mut acc = vec![LogSumExp::default(); steps];
    let mut thetas = vec![0.0; chunk.min(l) * td];
    let mut cum = vec![0.0; chunk.min(l)];
    let mut step_ll = vec![0.0; chunk.min(l)];
    let mut drawn = 0;
    while drawn < l {
        let n = chunk.min(l - drawn);
        let block = &mut thetas[..n * td];
        for theta in block.chunks_exact_mut(td) {
            problem.sample_prior(rng, theta);
        }
        let cum = &mut cum[..n];
        cum.fill(0.0);
        let step_ll = &mut step_ll[..n];
        for (t, (xi, y)) in trace.designs.chunks_exact(dd).zip(&trace.outcomes).enumerate() {
            problem.log_lik_batch(*y, block, xi, step_ll)?;
            for (c, s) in cum.iter_mut().zip(step_ll.iter()) {
                *c += s;
            }
            acc[t].extend(cum);
        }
        drawn += n;
    }
    let ln_l = (l as f64).ln();
    let ln_l1 = ((l + 1) as f64).ln();
    let mut spce = Vec::with_capacity(steps);
    let mut snmc = Vec::with_capacity(steps);
    for (t, a) in acc.iter().enumerate() {
        let others = a.value();
        let mut with_own = a.clone();
        with_own.push(own[t]);
        let g = own[t] - with_own.value() + ln_l1;
        if g > ln_l1 + 1e-9 || !g.is_finite() {
            return invalid(format!("sPCE integrand {g} violates its bound ln(L+1) = {ln_l1}"));
        }
        spce.push(g);
        snmc.push(own[t] - others + ln_l);
    }
    Ok(RolloutBounds { trace, spce, snmc })
}

/// Cumulative log-likelihood of the trace prefix under one parameter.
fn contrastive_prefix<P: DesignProblem + ?Sized>(problem: &P, trace: &RolloutTrace, theta: &[f64]) -> Result<Vec<f64>> {
    let dd = problem.design_dim();
    let mut total = 0.0;
    let mut out = Vec::with_capacity(trace.steps());
    for (xi, y) in trace.designs.chunks_exact(dd).zip(&trace.outcomes) {
        total += problem.log_lik(*y, theta, xi)?;
        out.push(total);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalSpec {
    pub n_rollouts: usize,
    pub l: usize,
    pub horizon: usize,
    pub chunk: usize,
    pub seed: u64,
}

/// Paired sPCE and sNMC over the same rollouts and contrastive sets.
#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub rollouts: Vec<RolloutBounds>,
    pub spce: BoundEstimate,
    pub snmc: BoundEstimate,
}

pub fn evaluate<P, D>(policy: &D, problem: &P, spec: &EvalSpec) -> Result<Evaluation>
where
    P: DesignProblem + ?Sized,
    D: DesignPolicy + ?Sized,
{
    let mut rollouts = Vec::with_capacity(spec.n_rollouts);
    for i in 0..spec.n_rollouts {
        let mut rng = RngState::with_stream(spec.seed, 2 * i as u64);
        let mut trace = rollout(policy, problem, spec.horizon, &mut rng)?;
        trace.rollout_id = i;
        trace.seed = spec.seed;
        let mut crng = RngState::with_stream(spec.seed, 2 * i as u64 + 1);
        rollouts.push(bound_trace(problem, trace, spec.l, spec.chunk, &mut crng)?);
    }
    let spce = BoundEstimate::from_values(BoundKind::Spce, spec.l, spec.horizon, rollouts.iter().map(|r| r.final_spce()).collect());
    let snmc = BoundEstimate::from_values(BoundKind::Snmc, spec.l, spec.horizon, rollouts.iter().map(|r| r.final_snmc()).collect());
    Ok(Evaluation { rollouts, spce, snmc })
}

pub fn spce_estimate<P, D>(policy: &D, problem: &P, spec: &EvalSpec) -> Result<BoundEstimate>
where
    P: DesignProblem + ?Sized,
    D: DesignPolicy + ?Sized,
{
    Ok(evaluate(policy, problem, spec)?.spce)
}

pub fn snmc_estimate<P, D>(policy: &D, problem: &P, spec: &EvalSpec) -> Result<BoundEstimate>
where
    P: DesignProblem + ?Sized,
    D: DesignPolicy + ?Sized,
{
    Ok(evaluate(policy, problem, spec)?.snmc)
}
