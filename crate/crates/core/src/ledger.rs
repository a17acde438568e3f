//! Per-learner running statistics and pseudo-regret accounting.

use crate::bounds::CandidateBound;
use crate::error::{Error, Result};
use crate::math::TOLERANCE;

/// Running statistics for one base learner inside a master.
#[derive(Debug, Clone)]
pub struct LearnerLedger {
    pub learner_id: usize,
    /// `n_i(t)`.
    pub plays: u64,
    /// `U_i(t)`, in reward units.
    pub reward_sum: f64,
    pub active: bool,
    pub bound: CandidateBound,
    /// Last round in which the learner passed the elimination test.
    pub last_pass_round: u64,
}

impl LearnerLedger {
    pub fn new(learner_id: usize, bound: CandidateBound) -> Self {
        Self {
            learner_id,
            plays: 0,
            reward_sum: 0.0,
            active: true,
            bound,
            last_pass_round: 0,
        }
    }

    pub fn record_play(&mut self, reward: f64) {
        self.plays += 1;
        self.reward_sum += reward;
    }

    /// `R_i(n_i(t))`.
    pub fn bound_value(&self) -> Result<f64> {
        self.bound.evaluate(self.plays)
    }

    /// `U_i(t) / n_i(t)`, or `None` before the first play.
    pub fn mean_reward(&self) -> Option<f64> {
        (self.plays > 0).then(|| self.reward_sum / self.plays as f64)
    }

    /// Marks the learner inactive. Deactivation is permanent.
    pub fn deactivate(&mut self) {
        self.active = false;
    }
}

/// Cumulative pseudo-regret, total and per learner.
#[derive(Debug, Clone, Default)]
pub struct RegretAccount {
    per_learner: Vec<f64>,
    total: f64,
    last_mu_star: f64,
    last_mean: f64,
}

impl RegretAccount {
    pub fn new(learners: usize) -> Self {
        Self {
            per_learner: vec![0.0; learners],
            ..Self::default()
        }
    }

    /// Adds `mu_star - conditional_mean` to learner `learner_id`.
    ///
    /// Increments below `-1e-9` mean the environment handed out an optimal
    /// value that is not optimal. Tiny negative round-off is clamped to zero.
    pub fn update(&mut self, learner_id: usize, mu_star: f64, conditional_mean: f64) -> Result<f64> {
        let inc = mu_star - conditional_mean;
        if !(inc >= -TOLERANCE) {
            return Err(Error::Environment(format!(
                "optimal value {mu_star} below played mean {conditional_mean}"
            )));
        }
        let slot = self.per_learner.get_mut(learner_id).ok_or_else(|| {
            Error::Input(format!("learner {learner_id} out of range"))
        })?;
        let inc = inc.max(0.0);
        *slot += inc;
        self.total += inc;
        self.last_mu_star = mu_star;
        self.last_mean = conditional_mean;
        Ok(inc)
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn learner(&self, id: usize) -> f64 {
        self.per_learner[id]
    }

    pub fn per_learner(&self) -> &[f64] {
        &self.per_learner
    }

    pub fn last_mu_star(&self) -> f64 {
        self.last_mu_star
    }

    pub fn last_mean(&self) -> f64 {
        self.last_mean
    }
}
