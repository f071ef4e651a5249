//! Sequential evaluation of offline reinforcement-learning algorithms on
//! tabular environments.
//!
//! Instead of training for epochs over a fixed dataset, a run reveals the
//! dataset to the learner incrementally through a replay buffer with a
//! visibility counter and scores the policy as a function of the data it
//! has had access to. The crate bundles:
//!
//! - small exactly-solvable environments ([`envs`]) and dataset
//!   construction across quality tiers ([`dataset`], [`tiers`]);
//! - the visibility-counter replay buffer ([`buffer`]) and the run driver
//!   with its mini-batch baseline and online fine-tuning phase ([`engine`]);
//! - tabular learners behind one train-step/act contract ([`algorithms`]);
//! - rollout and fitted-Q evaluation ([`evaluation`]) plus exact
//!   dynamic-programming references ([`solve`]);
//! - data-scaling metrics and model cards ([`metrics`]);
//! - experiment configuration, the matrix runner, and curve files
//!   ([`config`], [`runner`], [`curvefile`]).

// Tabular code walks state and action indices across several tables at
// once; plain index loops read better there than zipped enumerations.
#![allow(clippy::needless_range_loop)]

pub mod algorithms;
pub mod buffer;
pub mod config;
pub mod curvefile;
pub mod dataset;
pub mod engine;
pub mod envs;
pub mod error;
pub mod evaluation;
pub mod mdp;
pub mod metrics;
pub mod policy;
pub mod runner;
pub mod seeding;
pub mod solve;
pub mod tiers;

pub use error::{Result, SeqEvalError};
