use super::DesignProblem;
use crate::error::{invalid, shape_err, Result};
use crate::numkit::sigmoid;
use crate::prob::{log_normal_cdf, normal_logpdf_unchecked, sample_beta, sample_dirichlet, sample_lognormal, RngState};

const GOODS: usize = 3;
/// `theta = [rho, a_1, a_2, a_3, u]`.
const THETA_DIM: usize = GOODS + 2;

/// Constant elasticity of substitution preference model. A design is a pair of
/// baskets `(x, x')`; the outcome is a clipped sigmoid of the noisy utility gap.
#[derive(Clone, Debug, PartialEq)]
pub struct Ces {
    nu: f64,
    epsilon: f64,
    horizon: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
}

/// `(sum_i a_i x_i^rho)^(1/rho)`, evaluated as `exp(ln(sum) / rho)` with the
/// sum written as `1 + sum_i a_i (x_i^rho - 1)` so small `rho` stays accurate.
pub fn ces_utility(basket: &[f64], rho: f64, weights: &[f64]) -> f64 {
    let mut excess = weights.iter().sum::<f64>() - 1.0;
    for (x, a) in basket.iter().zip(weights) {
        excess += a * (rho * x.ln()).exp_m1();
    }
    let ln_sum = excess.ln_1p();
    if ln_sum == f64::NEG_INFINITY {
        return 0.0;
    }
    (ln_sum / rho).exp()
}

impl Ces {
    pub fn new(nu: f64, epsilon: f64, horizon: usize, lo: f64, hi: f64) -> Result<Self> {
        if !(nu > 0.0 && nu.is_finite()) {
            return invalid(format!("nu must be positive, got {nu}"));
        }
        if !(epsilon > 0.0 && epsilon < 0.5) {
            return invalid(format!("epsilon must lie in (0, 0.5), got {epsilon}"));
        }
        if !(lo >= 0.0 && lo < hi && hi.is_finite()) {
            return invalid(format!("basket bounds [{lo}, {hi}] must be a nonnegative finite interval"));
        }
        Ok(Self { nu, epsilon, horizon, lo: vec![lo; 2 * GOODS], hi: vec![hi; 2 * GOODS] })
    }

    pub fn with_nu(&self, nu: f64) -> Result<Self> {
        Self::new(nu, self.epsilon, self.horizon, self.lo[0], self.hi[0])
    }

    pub fn nu(&self) -> f64 {
        self.nu
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Mean and standard deviation of the latent utility gap `eta`.
    pub fn obs_params(&self, theta: &[f64], xi: &[f64]) -> (f64, f64) {
        let rho = theta[0];
        let weights = &theta[1..1 + GOODS];
        let u = theta[1 + GOODS];
        let (x, xp) = xi.split_at(GOODS);
        let gap = ces_utility(x, rho, weights) - ces_utility(xp, rho, weights);
        let dist: f64 = x.iter().zip(xp).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        (u * gap, self.nu * u * (1.0 + dist))
    }

    fn check(&self, theta: &[f64], xi: &[f64]) -> Result<()> {
        if theta.len() != THETA_DIM || xi.len() != 2 * GOODS {
            return shape_err(format!(
                "theta has {} entries and design {}, expected {THETA_DIM} and {}",
                theta.len(),
                xi.len(),
                2 * GOODS
            ));
        }
        Ok(())
    }

    fn log_lik_at(&self, y: f64, mu: f64, sd: f64) -> f64 {
        let lo = self.epsilon;
        let hi = 1.0 - self.epsilon;
        if y == lo {
            log_normal_cdf((logit(lo) - mu) / sd)
        } else if y == hi {
            log_normal_cdf(-(logit(hi) - mu) / sd)
        } else {
            normal_logpdf_unchecked(logit(y), mu, sd) - y.ln() - (-y).ln_1p()
        }
    }

    fn check_outcome(&self, y: f64) -> Result<()> {
        if !(y >= self.epsilon && y <= 1.0 - self.epsilon) {
            return invalid(format!("outcome {y} outside [{}, {}]", self.epsilon, 1.0 - self.epsilon));
        }
        Ok(())
    }
}

fn logit(y: f64) -> f64 {
    y.ln() - (-y).ln_1p()
}

impl DesignProblem for Ces {
    fn name(&self) -> &'static str {
        "ces"
    }

    fn design_dim(&self) -> usize {
        2 * GOODS
    }

    fn theta_dim(&self) -> usize {
        THETA_DIM
    }

    fn horizon(&self) -> usize {
        self.horizon
    }

    fn design_lo(&self) -> &[f64] {
        &self.lo
    }

    fn design_hi(&self) -> &[f64] {
        &self.hi
    }

    fn observation_range(&self) -> (f64, f64) {
        (self.epsilon, 1.0 - self.epsilon)
    }

    fn sample_prior(&self, rng: &mut RngState, theta: &mut [f64]) {
        theta[0] = sample_beta(rng, 1.0, 1.0).expect("valid beta shape");
        let w = sample_dirichlet(rng, &[1.0; GOODS]).expect("valid dirichlet concentration");
        theta[1..1 + GOODS].copy_from_slice(&w);
        theta[1 + GOODS] = sample_lognormal(rng, 1.0, 3.0).expect("valid lognormal scale");
    }

    fn simulate(&self, theta: &[f64], xi: &[f64], rng: &mut RngState) -> Result<f64> {
        self.check(theta, xi)?;
        let (mu, sd) = self.obs_params(theta, xi);
        let eta = mu + sd * rng.normal();
        Ok(sigmoid(eta).clamp(self.epsilon, 1.0 - self.epsilon))
    }

    fn log_lik(&self, y: f64, theta: &[f64], xi: &[f64]) -> Result<f64> {
        self.check(theta, xi)?;
        self.check_outcome(y)?;
        let (mu, sd) = self.obs_params(theta, xi);
        Ok(self.log_lik_at(y, mu, sd))
    }

    fn log_lik_batch(&self, y: f64, thetas: &[f64], xi: &[f64], out: &mut [f64]) -> Result<()> {
        if thetas.len() != out.len() * THETA_DIM || xi.len() != 2 * GOODS {
            return shape_err("batched likelihood shapes disagree");
        }
        self.check_outcome(y)?;
        for (theta, o) in thetas.chunks_exact(THETA_DIM).zip(out.iter_mut()) {
            let (mu, sd) = self.obs_params(theta, xi);
            *o = self.log_lik_at(y, mu, sd);
        }
        Ok(())
    }
}
