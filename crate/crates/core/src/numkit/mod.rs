//! Dense linear algebra, MLPs with manual backprop, Adam, and log-space reductions.

mod matrix;
mod mlp;
mod optim;
mod reduce;

pub use matrix::Matrix;
pub use mlp::{Activation, ForwardCache, LayerSpec, Mlp, Mode, ParamSlot, LAYER_NORM_EPS};
pub use optim::{polyak_update, AdamState};
pub use reduce::{log_add_exp, logsumexp, sigmoid, softplus, LogSumExp};
pub(crate) use reduce::logsumexp_unchecked;
