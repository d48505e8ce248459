//! Outcome-based and process-based reinforcement learning on finite layered
//! MDPs: coverage coefficients, trajectory-to-step change of measure, the
//! outcome-to-process transformation, preference learning and
//! advantage-as-reward pipelines.

pub mod advantage;
pub mod coverage;
pub mod error;
pub mod experiment;
pub mod fixtures;
pub mod format;
pub mod mdp;
pub mod measure_lemma;
pub mod outcome;
pub mod preference;
pub mod solvers;

pub use error::{Error, Result};
