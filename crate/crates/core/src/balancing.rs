//! Regret bound balancing and elimination for stochastic contexts.
//!
//! Each round the master plays the active learner whose presumed regret bound
//! `R_i(n_i)` is smallest, which keeps all active bounds within one unit of
//! each other. After the play it compares every learner's implied upper
//! confidence bound on the optimal value with every other learner's lower
//! confidence bound and drops the learners whose claim is contradicted.

use crate::bounds::CandidateBound;
use crate::concentration::hoeffding_radius;
use crate::env::LinearBanditEnv;
use crate::error::{param, Error, Result};
use crate::ledger::{LearnerLedger, RegretAccount};
use crate::learners::Learner;
use crate::math::TOLERANCE;
use crate::trace::{LearnerStat, RoundTrace};

/// Test parameters of the balancing master.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MasterConfig {
    pub delta: f64,
    /// Multiplier on the unit-range confidence radius. The default of 2
    /// accounts for one radius for context randomness and one for noise.
    pub c_scale: f64,
    /// Range of the reward stream the radius must cover, in units of the
    /// unit-range radius. 1 for rewards in `[0, 1]`.
    pub width: f64,
}

impl Default for MasterConfig {
    fn default() -> Self {
        Self {
            delta: 0.05,
            c_scale: 2.0,
            width: 1.0,
        }
    }
}

impl MasterConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return param(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.c_scale > 0.0 && self.c_scale.is_finite()) {
            return param(format!("c_scale must be positive, got {}", self.c_scale));
        }
        if !(self.width > 0.0 && self.width.is_finite()) {
            return param(format!("width must be positive, got {}", self.width));
        }
        Ok(())
    }
}

/// Round counter, per-learner ledgers and test configuration.
#[derive(Debug, Clone)]
pub struct MasterState {
    pub round: u64,
    pub ledgers: Vec<LearnerLedger>,
    pub config: MasterConfig,
    /// Messages about recoveries from states the theory rules out.
    pub diagnostics: Vec<String>,
}

impl MasterState {
    pub fn new(bounds: Vec<CandidateBound>, config: MasterConfig) -> Result<Self> {
        config.validate()?;
        if bounds.is_empty() {
            return param("need at least one learner");
        }
        for b in &bounds {
            b.validate()?;
        }
        Ok(Self {
            round: 0,
            ledgers: bounds
                .into_iter()
                .enumerate()
                .map(|(i, b)| LearnerLedger::new(i, b))
                .collect(),
            config,
            diagnostics: Vec::new(),
        })
    }

    pub fn learners(&self) -> usize {
        self.ledgers.len()
    }

    pub fn active_ids(&self) -> Vec<usize> {
        self.ledgers
            .iter()
            .filter(|l| l.active)
            .map(|l| l.learner_id)
            .collect()
    }

    /// `r_k`: confidence radius on the mean reward of a learner with `n`
    /// plays.
    pub fn radius(&self, n: u64) -> Result<f64> {
        let c = &self.config;
        Ok(c.c_scale * c.width * hoeffding_radius(n, self.learners(), c.delta)? / n as f64)
    }
}

/// The active learner with the smallest presumed bound. Ties go to fewer
/// plays, then to the lowest index.
pub fn select_learner(state: &MasterState) -> Result<usize> {
    let mut best: Option<(f64, u64, usize)> = None;
    for l in state.ledgers.iter().filter(|l| l.active) {
        let key = (l.bound_value()?, l.plays, l.learner_id);
        let better = match best {
            None => true,
            Some((b, n, _)) => key.0 < b || (key.0 == b && key.1 < n),
        };
        if better {
            best = Some(key);
        }
    }
    best.map(|(_, _, i)| i)
        .ok_or_else(|| Error::State("no active learner".into()))
}

/// Learners whose implied upper bound on the optimal value falls below some
/// other active learner's lower bound. Learners that have never been played
/// take no part on either side.
pub fn elimination_test(state: &MasterState) -> Result<Vec<usize>> {
    let mut lower_max = f64::NEG_INFINITY;
    let mut uppers = Vec::new();
    for l in state.ledgers.iter().filter(|l| l.active && l.plays > 0) {
        let n = l.plays as f64;
        let r = state.radius(l.plays)?;
        let mean = l.reward_sum / n;
        lower_max = lower_max.max(mean - r);
        uppers.push((l.learner_id, mean + l.bound_value()? / n + r));
    }
    Ok(uppers
        .into_iter()
        .filter(|&(_, up)| up < lower_max)
        .map(|(i, _)| i)
        .collect())
}

/// True when `R_i(n_i) <= R_j(n_j) + 1` for every pair of active learners.
pub fn is_balanced(state: &MasterState) -> Result<bool> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for l in state.ledgers.iter().filter(|l| l.active) {
        let v = l.bound_value()?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    Ok(hi <= lo + 1.0 + TOLERANCE)
}

/// Checks the play-ratio bound between every pair of active, played learners
/// with polynomial bounds:
/// `n_i / n_j <= max(2, (2 c_j / c_i)^{1/β_i} n_j^{β_j/β_i − 1})`, where `c`
/// is the product of scale and constant. Pairs involving other families are
/// skipped.
pub fn play_ratio_holds(state: &MasterState) -> bool {
    let poly: Vec<(f64, f64, f64)> = state
        .ledgers
        .iter()
        .filter(|l| l.active && l.plays > 0)
        .filter_map(|l| {
            l.bound
                .poly_parts()
                .map(|(s, c, b)| (l.plays as f64, s * c, b))
        })
        .collect();
    for &(ni, ci, bi) in &poly {
        for &(nj, cj, bj) in &poly {
            let lim = 2f64.max((2.0 * cj / ci).powf(1.0 / bi) * nj.powf(bj / bi - 1.0));
            if ni / nj > lim * (1.0 + 1e-12) {
                return false;
            }
        }
    }
    true
}

/// The stochastic-context master driving a set of base learners.
pub struct Balancing {
    state: MasterState,
    learners: Vec<Box<dyn Learner>>,
    regret: RegretAccount,
}

impl Balancing {
    pub fn new(
        learners: Vec<Box<dyn Learner>>,
        bounds: Vec<CandidateBound>,
        config: MasterConfig,
    ) -> Result<Self> {
        if learners.len() != bounds.len() {
            return param(format!(
                "{} learners but {} bounds",
                learners.len(),
                bounds.len()
            ));
        }
        let state = MasterState::new(bounds, config)?;
        let regret = RegretAccount::new(learners.len());
        Ok(Self {
            state,
            learners,
            regret,
        })
    }

    pub fn state(&self) -> &MasterState {
        &self.state
    }

    pub fn regret(&self) -> &RegretAccount {
        &self.regret
    }

    pub fn learner(&self, i: usize) -> &dyn Learner {
        self.learners[i].as_ref()
    }

    /// Plays one round against `env`.
    pub fn run_round(&mut self, env: &mut LinearBanditEnv) -> Result<RoundTrace> {
        let t = self.state.round + 1;
        let i = select_learner(&self.state)?;
        let actions = env.emit_round(t)?;
        let proposal = self.learners[i].propose(actions)?;
        let action = actions.row(proposal.index).to_vec();
        let mu_star = env.optimal_value();
        let (reward, mean) = env.realize(proposal.index)?;
        self.learners[i].observe(&action, reward)?;
        self.regret.update(i, mu_star, mean)?;

        let ledger = &mut self.state.ledgers[i];
        ledger.record_play(reward);
        if let CandidateBound::DataDependent(running) = &mut ledger.bound {
            if let Some(v) = self.learners[i].running_bound() {
                running.sync(v, ledger.plays);
            } else {
                running.push(f64::NAN);
            }
        }
        self.state.round = t;

        let eliminated = self.eliminate()?;
        Ok(RoundTrace {
            t,
            learner_id: i,
            action_index: proposal.index,
            reward,
            mu_star,
            mean,
            cum_pseudo_regret: self.regret.total(),
            learners: self.stats()?,
            eliminated,
            epoch_ended: false,
        })
    }

    fn eliminate(&mut self) -> Result<Vec<usize>> {
        let t = self.state.round;
        let mut out = elimination_test(&self.state)?;
        let active = self.state.active_ids();
        if !out.is_empty() && out.len() == active.len() {
            let keep = *out
                .iter()
                .max_by(|&&a, &&b| {
                    let ma = self.state.ledgers[a].mean_reward().unwrap_or(f64::NEG_INFINITY);
                    let mb = self.state.ledgers[b].mean_reward().unwrap_or(f64::NEG_INFINITY);
                    ma.total_cmp(&mb).then(b.cmp(&a))
                })
                .expect("non-empty");
            self.state.diagnostics.push(format!(
                "round {t}: every active learner failed the test; keeping learner {keep}"
            ));
            out.retain(|&i| i != keep);
        }
        for l in self.state.ledgers.iter_mut().filter(|l| l.active) {
            if out.contains(&l.learner_id) {
                l.deactivate();
            } else if l.plays > 0 {
                l.last_pass_round = t;
            }
        }
        Ok(out)
    }

    fn stats(&self) -> Result<Vec<LearnerStat>> {
        self.state
            .ledgers
            .iter()
            .map(|l| {
                Ok(LearnerStat {
                    plays: l.plays,
                    reward_sum: l.reward_sum,
                    bound: l.bound_value()?,
                    active: l.active,
                })
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn poly(scale: f64) -> CandidateBound {
        CandidateBound::poly(scale, 1.0, 0.5).unwrap()
    }

    fn state(bounds: Vec<CandidateBound>) -> MasterState {
        MasterState::new(bounds, MasterConfig::default()).unwrap()
    }

    #[test]
    fn selection_examples() {
        let mut s = state(vec![poly(1.0), poly(1.0), poly(1.0)]);
        assert_eq!(select_learner(&s).unwrap(), 0);
        // Bound values 5, 3, 7 via play counts under R(n) = n for small n.
        for (l, n) in s.ledgers.iter_mut().zip([5u64, 3, 7]) {
            l.plays = n;
            l.bound = CandidateBound::poly(10.0, 1.0, 1.0).unwrap();
        }
        assert_eq!(select_learner(&s).unwrap(), 1);
        s.ledgers[1].deactivate();
        assert_eq!(select_learner(&s).unwrap(), 0);
        for l in &mut s.ledgers {
            l.deactivate();
        }
        assert!(matches!(select_learner(&s), Err(Error::State(_))));
    }

    #[test]
    fn single_and_symmetric_learners_survive() {
        let mut s = state(vec![poly(1.0)]);
        s.ledgers[0].plays = 100;
        s.ledgers[0].reward_sum = 0.0;
        assert!(elimination_test(&s).unwrap().is_empty());
        let mut s = state(vec![poly(2.0), poly(2.0)]);
        for l in &mut s.ledgers {
            l.plays = 50;
            l.reward_sum = 20.0;
        }
        assert!(elimination_test(&s).unwrap().is_empty());
    }

    #[test]
    fn gap_learner_eliminated() {
        let mut s = state(vec![poly(2.0), poly(2.0)]);
        s.ledgers[0].plays = 1000;
        s.ledgers[0].reward_sum = 200.0;
        s.ledgers[1].plays = 1000;
        s.ledgers[1].reward_sum = 900.0;
        // Independent evaluation: r = 2 · hoeffding_radius(1000, 2, 0.05) / 1000
        // = 0.1335230..., upper_0 = 0.3967686... < lower_1 = 0.7664770...
        let r = s.radius(1000).unwrap();
        assert!((r - 0.133_523_026_45).abs() < 1e-9, "{r}");
        assert_eq!(elimination_test(&s).unwrap(), vec![0]);
    }

    #[test]
    fn unplayed_learners_skipped() {
        let mut s = state(vec![poly(1.0), poly(1.0)]);
        s.ledgers[1].plays = 10;
        s.ledgers[1].reward_sum = 10.0;
        assert!(elimination_test(&s).unwrap().is_empty());
    }
}
