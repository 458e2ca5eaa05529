//! Command-line harness: training over seed lists, evaluation with model
//! overrides, the random-design baseline and variant sweeps.

pub mod commands;
pub mod config;
pub mod output;
