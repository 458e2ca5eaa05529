//! Random streams and the distributions used by the environments and policies.

mod dist;
mod rng;
mod tanh_normal;

pub use dist::{
    log_normal_cdf, normal_cdf, normal_logpdf, sample_beta, sample_dirichlet, sample_gamma,
    sample_lognormal, sample_std_normal, DiagGaussian, LN_SQRT_2PI,
};
pub(crate) use dist::normal_logpdf_unchecked;
pub use rng::RngState;
pub(crate) use tanh_normal::{squash, squash_backward};
pub use tanh_normal::{TanhNormal, TanhSample, ACTION_LIMIT, LOG_STD_MAX, LOG_STD_MIN};
