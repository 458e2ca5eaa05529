//! Design problems and the hidden-parameter MDP built on top of them.

mod ces;
mod config;
mod hipmdp;
mod location;

pub use ces::{ces_utility, Ces};
pub use config::{Override, ProblemConfig, ProblemKind};
pub use hipmdp::{direct_spce_integrand, env_reset, env_step, recompute_log_c, EpisodeState, StepResult};
pub use location::LocationFinding;

use crate::error::Result;
use crate::prob::RngState;

/// A Bayesian experimental design problem with scalar outcomes.
///
/// `theta` is a flat parameter vector of length [`theta_dim`](Self::theta_dim);
/// designs live in the box `[design_lo, design_hi]`.
pub trait DesignProblem {
    fn name(&self) -> &'static str;
    fn design_dim(&self) -> usize;
    fn theta_dim(&self) -> usize;
    fn horizon(&self) -> usize;
    fn design_lo(&self) -> &[f64];
    fn design_hi(&self) -> &[f64];
    /// Range mapped onto `[0, 1]` by [`scale_observation`](Self::scale_observation).
    fn observation_range(&self) -> (f64, f64);
    fn sample_prior(&self, rng: &mut RngState, theta: &mut [f64]);
    fn simulate(&self, theta: &[f64], xi: &[f64], rng: &mut RngState) -> Result<f64>;
    fn log_lik(&self, y: f64, theta: &[f64], xi: &[f64]) -> Result<f64>;

    /// Log-likelihood of one outcome under each parameter row of `thetas`.
    fn log_lik_batch(&self, y: f64, thetas: &[f64], xi: &[f64], out: &mut [f64]) -> Result<()> {
        let td = self.theta_dim();
        for (theta, o) in thetas.chunks_exact(td).zip(out.iter_mut()) {
            *o = self.log_lik(y, theta, xi)?;
        }
        Ok(())
    }

    fn outcome_dim(&self) -> usize {
        1
    }

    /// Clamped affine map of an outcome onto `[0, 1]`.
    fn scale_observation(&self, y: f64) -> f64 {
        let (lo, hi) = self.observation_range();
        ((y - lo) / (hi - lo)).clamp(0.0, 1.0)
    }

    /// Affine map from `[-1, 1]^d` onto the design box.
    fn scale_action(&self, action: &[f64], design: &mut [f64]) {
        for (((x, a), lo), hi) in design.iter_mut().zip(action).zip(self.design_lo()).zip(self.design_hi()) {
            *x = lo + 0.5 * (a + 1.0) * (hi - lo);
        }
    }

    /// Inverse of [`scale_action`](Self::scale_action).
    fn unscale_design(&self, design: &[f64], action: &mut [f64]) {
        for (((a, x), lo), hi) in action.iter_mut().zip(design).zip(self.design_lo()).zip(self.design_hi()) {
            *a = 2.0 * (x - lo) / (hi - lo) - 1.0;
        }
    }
}

/// The concrete problems, dispatched statically.
#[derive(Clone, Debug, PartialEq)]
pub enum Problem {
    Location(LocationFinding),
    Ces(Ces),
}

macro_rules! dispatch {
    ($self:ident, $p:ident => $e:expr) => {
        match $self {
            Problem::Location($p) => $e,
            Problem::Ces($p) => $e,
        }
    };
}

impl DesignProblem for Problem {
    fn name(&self) -> &'static str {
        dispatch!(self, p => p.name())
    }
    fn design_dim(&self) -> usize {
        dispatch!(self, p => p.design_dim())
    }
    fn theta_dim(&self) -> usize {
        dispatch!(self, p => p.theta_dim())
    }
    fn horizon(&self) -> usize {
        dispatch!(self, p => p.horizon())
    }
    fn design_lo(&self) -> &[f64] {
        dispatch!(self, p => p.design_lo())
    }
    fn design_hi(&self) -> &[f64] {
        dispatch!(self, p => p.design_hi())
    }
    fn observation_range(&self) -> (f64, f64) {
        dispatch!(self, p => p.observation_range())
    }
    fn sample_prior(&self, rng: &mut RngState, theta: &mut [f64]) {
        dispatch!(self, p => p.sample_prior(rng, theta))
    }
    fn simulate(&self, theta: &[f64], xi: &[f64], rng: &mut RngState) -> Result<f64> {
        dispatch!(self, p => p.simulate(theta, xi, rng))
    }
    fn log_lik(&self, y: f64, theta: &[f64], xi: &[f64]) -> Result<f64> {
        dispatch!(self, p => p.log_lik(y, theta, xi))
    }
    fn log_lik_batch(&self, y: f64, thetas: &[f64], xi: &[f64], out: &mut [f64]) -> Result<()> {
        dispatch!(self, p => p.log_lik_batch(y, thetas, xi, out))
    }
}
