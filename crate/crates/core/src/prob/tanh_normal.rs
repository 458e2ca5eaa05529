//! Squashed Gaussian `a = tanh(mu + sigma * eps)` with its change-of-variables density.

use super::dist::LN_SQRT_2PI;
use super::RngState;
use crate::error::{invalid, Result};
use crate::numkit::softplus;

pub const LOG_STD_MIN: f64 = -20.0;
pub const LOG_STD_MAX: f64 = 2.0;
/// Largest action magnitude; keeps `atanh` finite on stored actions.
pub const ACTION_LIMIT: f64 = 1.0 - 1e-6;

fn pre_tanh_limit() -> f64 {
    ACTION_LIMIT.atanh()
}

/// `ln(1 - tanh(u)^2)` without cancellation.
#[inline]
fn log_one_minus_tanh_sq(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u - softplus(-2.0 * u))
}

#[inline]
fn clamp_log_std(raw: f64) -> f64 {
    raw.clamp(LOG_STD_MIN, LOG_STD_MAX)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TanhNormal {
    mean: Vec<f64>,
    log_std: Vec<f64>,
}

/// A reparameterised draw: the action, its log density and the noise used.
#[derive(Clone, Debug, PartialEq)]
pub struct TanhSample {
    pub action: Vec<f64>,
    pub log_prob: f64,
    pub noise: Vec<f64>,
}

impl TanhNormal {
    /// `log_std` is clamped to `[LOG_STD_MIN, LOG_STD_MAX]`.
    pub fn new(mean: Vec<f64>, log_std: Vec<f64>) -> Result<Self> {
        if mean.len() != log_std.len() || mean.is_empty() {
            return invalid("tanh-normal mean and log-std must be nonempty and equal length");
        }
        if mean.iter().chain(&log_std).any(|v| !v.is_finite()) {
            return invalid("tanh-normal parameters must be finite");
        }
        let log_std = log_std.into_iter().map(clamp_log_std).collect();
        Ok(Self { mean, log_std })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn sample(&self, rng: &mut RngState) -> TanhSample {
        let noise: Vec<f64> = (0..self.dim()).map(|_| rng.normal()).collect();
        self.sample_with_noise(noise)
    }

    pub fn sample_with_noise(&self, noise: Vec<f64>) -> TanhSample {
        let mut action = vec![0.0; self.dim()];
        let log_prob = squash(&self.mean, &self.log_std, &noise, &mut action);
        TanhSample { action, log_prob, noise }
    }

    /// `tanh(mean)` and its log density.
    pub fn mode(&self) -> (Vec<f64>, f64) {
        let action: Vec<f64> = self.mean.iter().map(|m| m.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT)).collect();
        let lp = self.log_prob(&action);
        (action, lp)
    }

    /// Density of an action; entries at or beyond `ACTION_LIMIT` are clamped
    /// first, and the mean is clamped as in sampling.
    pub fn log_prob(&self, action: &[f64]) -> f64 {
        action
            .iter()
            .zip(&self.mean)
            .zip(&self.log_std)
            .map(|((a, m), ls)| {
                let u = a.clamp(-ACTION_LIMIT, ACTION_LIMIT).atanh();
                let eps = (u - m.clamp(-pre_tanh_limit(), pre_tanh_limit())) / ls.exp();
                -0.5 * eps * eps - ls - LN_SQRT_2PI - log_one_minus_tanh_sq(u)
            })
            .sum()
    }
}

/// Reparameterised squash of one row. `log_std_raw` is clamped here and the
/// mean is clamped to the pre-tanh limit, beyond which actions are saturated.
/// Writes the action and returns its log density.
pub(crate) fn squash(mean: &[f64], log_std_raw: &[f64], noise: &[f64], action: &mut [f64]) -> f64 {
    let limit = pre_tanh_limit();
    let mut lp = 0.0;
    for i in 0..mean.len() {
        let ls = clamp_log_std(log_std_raw[i]);
        let u = mean[i].clamp(-limit, limit) + ls.exp() * noise[i];
        action[i] = u.tanh().clamp(-ACTION_LIMIT, ACTION_LIMIT);
        lp += -0.5 * noise[i] * noise[i] - ls - LN_SQRT_2PI - log_one_minus_tanh_sq(u);
    }
    lp
}

/// Pathwise gradients of one squashed row with the noise held fixed.
///
/// Given upstream `d loss / d action` and `d loss / d log_prob`, writes the
/// gradients with respect to the raw mean and the raw (pre-clamp) log-std.
#[allow(clippy::too_many_arguments)]
pub(crate) fn squash_backward(
    mean: &[f64],
    log_std_raw: &[f64],
    noise: &[f64],
    action: &[f64],
    grad_action: &[f64],
    grad_log_prob: f64,
    grad_mean: &mut [f64],
    grad_log_std: &mut [f64],
) {
    let limit = pre_tanh_limit();
    for i in 0..mean.len() {
        let raw = log_std_raw[i];
        let ls = clamp_log_std(raw);
        let sigma = ls.exp();
        let t = (mean[i].clamp(-limit, limit) + sigma * noise[i]).tanh();
        // The action clamp only bites where 1 - t^2 is below 2e-6.
        let da = if action[i].abs() >= ACTION_LIMIT { 0.0 } else { 1.0 - t * t };
        // d/du of the squashed action and of -ln(1 - tanh(u)^2); the Gaussian
        // term is constant along the reparameterisation.
        let du = grad_action[i] * da + grad_log_prob * 2.0 * t;
        grad_mean[i] = if mean[i].abs() < limit { du } else { 0.0 };
        let ls_active = raw > LOG_STD_MIN && raw < LOG_STD_MAX;
        grad_log_std[i] = if ls_active { du * sigma * noise[i] - grad_log_prob } else { 0.0 };
    }
}
