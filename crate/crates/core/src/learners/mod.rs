//! Base learners.
//!
//! A base learner sees the action set, proposes one action together with an
//! optimistic and a pessimistic estimate of its value, and learns from the
//! rewards of the rounds it is picked (or of every round, when observations
//! are broadcast).

mod oful;
mod scripted;

pub use oful::{oful_regret_bound, Oful, OfulParams};
pub use scripted::Scripted;

use crate::env::ActionSet;
use crate::error::Result;

/// Static shape parameters a learner declares about its model class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Descriptor {
    /// Number of action coordinates the learner uses.
    pub dim: usize,
    /// Bound on the parameter norm.
    pub param_norm: f64,
    /// Bound on the action norm.
    pub action_norm: f64,
    /// Bound on absolute expected rewards.
    pub reward_max: f64,
}

/// A learner's choice for one round.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Proposal {
    pub index: usize,
    /// Upper confidence value of the chosen action.
    pub optimistic: f64,
    /// Lower confidence value of the chosen action.
    pub lower: f64,
}

pub trait Learner: Send {
    /// Chooses an action. Must be deterministic given the learner state and
    /// the action set, with ties going to the lowest index.
    fn propose(&self, actions: &ActionSet) -> Result<Proposal>;

    /// Incorporates the reward of `action`, given in full environment
    /// coordinates.
    fn observe(&mut self, action: &[f64], reward: f64) -> Result<()>;

    /// A running data-dependent regret bound, if the learner keeps one.
    fn running_bound(&self) -> Option<f64> {
        None
    }

    fn descriptor(&self) -> Descriptor;

    /// Number of observations incorporated so far.
    fn plays(&self) -> u64;

    /// Forgets all observations.
    fn reset(&mut self);
}
