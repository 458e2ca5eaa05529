//! Samplers and densities used by the design problems.

use std::f64::consts::{PI, SQRT_2};

use rand_distr::{Beta, Gamma, LogNormal};

use super::RngState;
use crate::error::{invalid, Error, Result};

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

pub fn sample_std_normal(rng: &mut RngState, dim: usize) -> Vec<f64> {
    (0..dim).map(|_| rng.normal()).collect()
}

/// Diagonal Gaussian with strictly positive scales.
#[derive(Clone, Debug, PartialEq)]
pub struct DiagGaussian {
    mean: Vec<f64>,
    std: Vec<f64>,
}

impl DiagGaussian {
    pub fn new(mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        if mean.len() != std.len() {
            return invalid("mean and std lengths differ");
        }
        if std.iter().any(|s| !(*s > 0.0)) {
            return invalid("standard deviations must be positive");
        }
        Ok(Self { mean, std })
    }

    pub fn standard(dim: usize) -> Self {
        Self { mean: vec![0.0; dim], std: vec![1.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn sample_into(&self, rng: &mut RngState, out: &mut [f64]) {
        for ((o, m), s) in out.iter_mut().zip(&self.mean).zip(&self.std) {
            *o = m + s * rng.normal();
        }
    }

    pub fn log_prob(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.std)
            .map(|((x, m), s)| normal_logpdf_unchecked(*x, *m, *s))
            .sum()
    }
}

fn gamma(shape: f64) -> Result<Gamma<f64>> {
    if !(shape > 0.0) || !shape.is_finite() {
        return invalid(format!("gamma shape must be positive, got {shape}"));
    }
    Gamma::new(shape, 1.0).map_err(|e| Error::InvalidArgument(format!("gamma shape {shape}: {e}")))
}

/// Gamma(shape, 1).
pub fn sample_gamma(rng: &mut RngState, shape: f64) -> Result<f64> {
    Ok(rng.sample(&gamma(shape)?))
}

/// Beta draw strictly inside `(0, 1)`.
pub fn sample_beta(rng: &mut RngState, a: f64, b: f64) -> Result<f64> {
    if !(a > 0.0 && b > 0.0) {
        return invalid(format!("beta parameters must be positive, got ({a}, {b})"));
    }
    let dist = Beta::new(a, b).map_err(|e| Error::InvalidArgument(format!("beta ({a}, {b}): {e}")))?;
    loop {
        let v = rng.sample(&dist);
        if v > 0.0 && v < 1.0 {
            return Ok(v);
        }
    }
}

/// Normalised Gamma draws; the rounding residue goes to the largest
/// component so the result sums to one within an ulp.
pub fn sample_dirichlet(rng: &mut RngState, alpha: &[f64]) -> Result<Vec<f64>> {
    if alpha.is_empty() {
        return invalid("dirichlet concentrations must be nonempty and positive");
    }
    let gammas = alpha.iter().map(|a| gamma(*a)).collect::<Result<Vec<_>>>()?;
    loop {
        let g: Vec<f64> = gammas.iter().map(|d| rng.sample(d)).collect();
        let total: f64 = g.iter().sum();
        if total > 0.0 {
            let mut out: Vec<f64> = g.iter().map(|v| v / total).collect();
            let residue = 1.0 - out.iter().sum::<f64>();
            let imax = (0..out.len()).fold(0, |best, i| if out[i] > out[best] { i } else { best });
            out[imax] += residue;
            return Ok(out);
        }
    }
}

pub fn sample_lognormal(rng: &mut RngState, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("log-normal scale must be positive, got {sigma}"));
    }
    let dist = LogNormal::new(mu, sigma).map_err(|e| Error::InvalidArgument(format!("log-normal ({mu}, {sigma}): {e}")))?;
    Ok(rng.sample(&dist))
}

pub fn normal_logpdf(x: f64, mu: f64, sigma: f64) -> Result<f64> {
    if !(sigma > 0.0) {
        return invalid(format!("normal scale must be positive, got {sigma}"));
    }
    Ok(normal_logpdf_unchecked(x, mu, sigma))
}

#[inline]
pub(crate) fn normal_logpdf_unchecked(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    -0.5 * z * z - sigma.ln() - LN_SQRT_2PI
}

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / SQRT_2)
}

/// `ln Φ(z)`, accurate deep into the lower tail.
pub fn log_normal_cdf(z: f64) -> f64 {
    if z > 5.0 {
        (-0.5 * libm::erfc(z / SQRT_2)).ln_1p()
    } else if z > -30.0 {
        (0.5 * libm::erfc(-z / SQRT_2)).ln()
    } else {
        // Asymptotic series of the Mills ratio.
        let z2 = z * z;
        let inv = 1.0 / z2;
        let series = 1.0 - inv + 3.0 * inv * inv - 15.0 * inv.powi(3) + 105.0 * inv.powi(4);
        -0.5 * z2 - (-z).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
    }
}
