use super::DesignProblem;
use crate::error::{invalid, shape_err, Result};
use crate::prob::{normal_logpdf_unchecked, RngState};

/// `K` point sources in `d` dimensions; a design is a measurement point and
/// the outcome is the log total intensity plus Gaussian noise.
#[derive(Clone, Debug, PartialEq)]
pub struct LocationFinding {
    k: usize,
    d: usize,
    alpha: f64,
    b: f64,
    m: f64,
    sigma: f64,
    horizon: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    obs_range: (f64, f64),
}

impl LocationFinding {
    #[allow(clippy::too_many_arguments)]
    pub fn new(k: usize, d: usize, alpha: f64, b: f64, m: f64, sigma: f64, horizon: usize, lo: f64, hi: f64) -> Result<Self> {
        if k == 0 || d == 0 {
            return invalid("location finding needs K >= 1 and d >= 1");
        }
        if !(b > 0.0 && m > 0.0 && sigma > 0.0 && alpha >= 0.0) {
            return invalid("location finding needs b, m, sigma > 0 and alpha >= 0");
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return invalid(format!("design bounds [{lo}, {hi}] are not a finite interval"));
        }
        let obs_range = Self::declared_range(k, alpha, b, m, sigma);
        Ok(Self { k, d, alpha, b, m, sigma, horizon, lo: vec![lo; d], hi: vec![hi; d], obs_range })
    }

    /// Scaling range `[ln b - 5 sigma, ln(b + K alpha / m) + 5 sigma]`.
    fn declared_range(k: usize, alpha: f64, b: f64, m: f64, sigma: f64) -> (f64, f64) {
        (b.ln() - 5.0 * sigma, (b + k as f64 * alpha / m).ln() + 5.0 * sigma)
    }

    /// Same problem with a different number of sources. The observation
    /// scaling keeps the current range so a trained policy sees the same map.
    pub fn with_sources(&self, k: usize) -> Result<Self> {
        if k == 0 {
            return invalid("K override must be >= 1");
        }
        Ok(Self { k, ..self.clone() })
    }

    pub fn sources(&self) -> usize {
        self.k
    }

    pub fn space_dim(&self) -> usize {
        self.d
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `b + sum_i alpha / (m + |beta_i - xi|^2)`; `theta` is `K x d`, row-major.
    pub fn total_intensity(&self, theta: &[f64], xi: &[f64]) -> f64 {
        let mut mu = self.b;
        for beta in theta.chunks_exact(self.d) {
            let sq: f64 = beta.iter().zip(xi).map(|(p, q)| (p - q) * (p - q)).sum();
            mu += self.alpha / (self.m + sq);
        }
        mu
    }

    fn check(&self, theta: &[f64], xi: &[f64]) -> Result<()> {
        if theta.len() != self.k * self.d || xi.len() != self.d {
            return shape_err(format!(
                "theta has {} entries and design {}, expected {} and {}",
                theta.len(),
                xi.len(),
                self.k * self.d,
                self.d
            ));
        }
        Ok(())
    }
}

impl DesignProblem for LocationFinding {
    fn name(&self) -> &'static str {
        "location_finding"
    }

    fn design_dim(&self) -> usize {
        self.d
    }

    fn theta_dim(&self) -> usize {
        self.k * self.d
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
        self.obs_range
    }

    fn sample_prior(&self, rng: &mut RngState, theta: &mut [f64]) {
        for v in theta.iter_mut() {
            *v = rng.normal();
        }
    }

    fn simulate(&self, theta: &[f64], xi: &[f64], rng: &mut RngState) -> Result<f64> {
        self.check(theta, xi)?;
        Ok(self.total_intensity(theta, xi).ln() + self.sigma * rng.normal())
    }

    fn log_lik(&self, y: f64, theta: &[f64], xi: &[f64]) -> Result<f64> {
        self.check(theta, xi)?;
        if !y.is_finite() {
            return invalid(format!("outcome {y} is not finite"));
        }
        Ok(normal_logpdf_unchecked(y, self.total_intensity(theta, xi).ln(), self.sigma))
    }

    fn log_lik_batch(&self, y: f64, thetas: &[f64], xi: &[f64], out: &mut [f64]) -> Result<()> {
        let td = self.theta_dim();
        if thetas.len() != out.len() * td || xi.len() != self.d {
            return shape_err("batched likelihood shapes disagree");
        }
        if !y.is_finite() {
            return invalid(format!("outcome {y} is not finite"));
        }
        for (theta, o) in thetas.chunks_exact(td).zip(out.iter_mut()) {
            *o = normal_logpdf_unchecked(y, self.total_intensity(theta, xi).ln(), self.sigma);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prob::LN_SQRT_2PI;

    fn table() -> LocationFinding {
        LocationFinding::new(2, 2, 1.0, 0.1, 1e-4, 0.5, 30, -4.0, 4.0).unwrap()
    }

    #[test]
    fn intensity_at_a_source() {
        let p = LocationFinding::new(1, 2, 1.0, 0.1, 1e-4, 0.5, 30, -4.0, 4.0).unwrap();
        let mu = p.total_intensity(&[0.3, -1.2], &[0.3, -1.2]);
        assert!((mu - 10000.1).abs() < 1e-9);
    }

    #[test]
    fn intensity_far_away_tends_to_background() {
        let p = table();
        let mu = p.total_intensity(&[0.0, 0.0, 1.0, 1.0], &[1e6, 1e6]);
        assert!((mu - 0.1).abs() < 1e-9);
    }

    #[test]
    fn intensity_superposes() {
        let p2 = table();
        let p1 = p2.with_sources(1).unwrap();
        let theta = [0.5, -0.2, -1.0, 2.0];
        let xi = [0.1, 0.7];
        let sum = p1.total_intensity(&theta[..2], &xi) + p1.total_intensity(&theta[2..], &xi) - 0.1;
        assert!((p2.total_intensity(&theta, &xi) - sum).abs() < 1e-12);
    }

    #[test]
    fn log_lik_peaks_at_log_intensity() {
        let p = table();
        let theta = [0.5, -0.2, -1.0, 2.0];
        let xi = [0.1, 0.7];
        let ln_mu = p.total_intensity(&theta, &xi).ln();
        let peak = p.log_lik(ln_mu, &theta, &xi).unwrap();
        assert!((peak - (-0.5f64.ln() - LN_SQRT_2PI)).abs() < 1e-12);
        for dy in [0.1, 0.7, 2.0] {
            let a = p.log_lik(ln_mu + dy, &theta, &xi).unwrap();
            let b = p.log_lik(ln_mu - dy, &theta, &xi).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn simulated_outcomes_follow_the_likelihood() {
        // Kolmogorov-Smirnov against the Gaussian CDF implied by log_lik.
        let p = table();
        let theta = [0.5, -0.2, -1.0, 2.0];
        let xi = [0.1, 0.7];
        let ln_mu = p.total_intensity(&theta, &xi).ln();
        let mut rng = RngState::new(11);
        let n = 100_000;
        let mut ys: Vec<f64> = (0..n).map(|_| p.simulate(&theta, &xi, &mut rng).unwrap()).collect();
        ys.sort_by(f64::total_cmp);
        let mut ks = 0.0f64;
        for (i, y) in ys.iter().enumerate() {
            let cdf = crate::prob::normal_cdf((y - ln_mu) / 0.5);
            ks = ks.max((cdf - i as f64 / n as f64).abs()).max((cdf - (i + 1) as f64 / n as f64).abs());
        }
        assert!(ks < 1.63 / (n as f64).sqrt(), "ks {ks}");
    }

    #[test]
    fn override_keeps_dimensions_and_scaling() {
        let p = table();
        let q = p.with_sources(5).unwrap();
        assert_eq!(q.design_dim(), p.design_dim());
        assert_eq!(q.observation_range(), p.observation_range());
        assert_eq!(q.theta_dim(), 10);
    }

    #[test]
    fn rejects_bad_shapes_and_parameters() {
        let p = table();
        assert!(p.log_lik(0.0, &[0.0; 3], &[0.0, 0.0]).is_err());
        assert!(p.log_lik(f64::NAN, &[0.0; 4], &[0.0, 0.0]).is_err());
        assert!(LocationFinding::new(0, 2, 1.0, 0.1, 1e-4, 0.5, 30, -4.0, 4.0).is_err());
        assert!(LocationFinding::new(2, 2, 1.0, 0.0, 1e-4, 0.5, 30, -4.0, 4.0).is_err());
    }
}
