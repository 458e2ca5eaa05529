//! Soft actor-critic agents for design policies: REDQ-style critic
//! ensembles, dropout critics, periodic resets and SUNRISE agent ensembles.

mod buffer;
mod checkpoint;
mod config;
mod ensemble;
mod member;
mod train;

pub use buffer::{ReplayBuffer, Transition};
pub use checkpoint::{Checkpoint, MemberSnapshot, NamedAdam, Tensor, CHECKPOINT_FORMAT};
pub use config::{droq_configure, AgentConfig, AgentConfigPatch, Variant};
pub use ensemble::{
    averaged_distribution, init_stream, sbr_maybe_reset, sunrise_eval_select, sunrise_learn, sunrise_targets,
    sunrise_ucb_action, sunrise_update, sunrise_weight, ucb_score, AgentEnsemble, EnsemblePolicy, EvalMethod,
    SunriseTargets, UpdateStats, INIT_STREAM_BASE,
};
pub use member::{Critic, EncodedBatch, LearnStats, Member};
pub use train::{train, CurvePoint, TrainOutcome};
