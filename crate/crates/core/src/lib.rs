//! Sequential Bayesian experimental design with SAC-family reinforcement learning.
//!
//! Design problems are cast as hidden-parameter MDPs whose per-step reward is
//! the increment of the sequential prior contrastive estimation (sPCE) bound,
//! so the undiscounted return of an episode is exactly the sPCE integrand.
//! Policies are permutation-invariant encoder/emitter networks trained with
//! SAC, REDQ, DroQ, SBR or SUNRISE, and evaluated with paired sPCE/sNMC
//! estimates under optional model overrides.
//!
//! Modules, bottom-up:
//!
//! - [`numkit`]: matrices, MLPs with manual backprop, Adam, log-space reductions.
//! - [`prob`]: seeded streams, samplers, the squashed Gaussian.
//! - [`envs`]: the design-problem trait, location finding, CES, the HiP-MDP.
//! - [`policy`]: encoder/emitter design network.
//! - [`bounds`]: rollouts and streaming sPCE/sNMC estimation.
//! - [`agents`]: replay buffer, critics, and the SAC-family updates.

pub mod agents;
pub mod bounds;
pub mod envs;
mod error;
pub mod numkit;
pub mod policy;
pub mod prob;

pub use error::{Error, Result};
