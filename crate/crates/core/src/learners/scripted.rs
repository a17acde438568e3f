use crate::env::ActionSet;
use crate::error::{param, Error, Result};
use crate::learners::{Descriptor, Learner, Proposal};

/// A context-free learner that always plays the arm whose first coordinate
/// is closest to `mean`.
///
/// In an environment whose actions are the scalars `[m_1, ..., m_K]` with
/// `θ* = [1]`, this plays a fixed-mean arm, so its per-round regret is
/// exactly `μ* − mean`. Test double for elimination behavior.
#[derive(Debug, Clone, PartialEq)]
pub struct Scripted {
    mean: f64,
    /// Lower-confidence value reported to epoch tests. Defaults to `mean`.
    reported_lower: f64,
    plays: u64,
}

impl Scripted {
    pub fn new(mean: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&mean) {
            return param(format!("scripted mean must lie in [0, 1], got {mean}"));
        }
        Ok(Self {
            mean,
            reported_lower: mean,
            plays: 0,
        })
    }

    /// Overrides the reported lower-confidence value.
    pub fn reporting_lower(mut self, lower: f64) -> Self {
        self.reported_lower = lower;
        self
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }
}

impl Learner for Scripted {
    fn propose(&self, actions: &ActionSet) -> Result<Proposal> {
        if actions.is_empty() {
            return Err(Error::Input("empty action set".into()));
        }
        let mut best = 0;
        let mut best_gap = f64::INFINITY;
        for (i, a) in actions.rows().enumerate() {
            let gap = (a[0] - self.mean).abs();
            if gap < best_gap {
                best = i;
                best_gap = gap;
            }
        }
        Ok(Proposal {
            index: best,
            optimistic: self.mean.max(self.reported_lower),
            lower: self.reported_lower,
        })
    }

    fn observe(&mut self, _action: &[f64], _reward: f64) -> Result<()> {
        self.plays += 1;
        Ok(())
    }

    fn descriptor(&self) -> Descriptor {
        Descriptor {
            dim: 1,
            param_norm: 1.0,
            action_norm: 1.0,
            reward_max: 1.0,
        }
    }

    fn plays(&self) -> u64 {
        self.plays
    }

    fn reset(&mut self) {
        self.plays = 0;
    }
}
