//! Monte Carlo and invariant checks shared by the `verify` command and the
//! test suite.

use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::balancing::{is_balanced, play_ratio_holds};
use crate::concentration::{
    elliptical_potential_check, hoeffding_radius, playcount_upper_bound, randomized_elliptical_bound,
    GramAccumulator,
};
use crate::env::{ActionModel, EnvSpec, LinearBanditEnv, Noise};
use crate::error::Result;
use crate::harness::config::{preset, BoundConfig, ExperimentConfig};
use crate::harness::scenario::{Instance, Master};
use crate::learners::{oful_regret_bound, Learner, Oful, OfulParams};
use crate::math::norm;
use crate::rng::replicate_seed;

/// One named pass/fail check.
#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub detail: String,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            detail: detail.into(),
            pass,
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = if self.pass { "PASS" } else { "FAIL" };
        write!(f, "{tag} {}: {}", self.name, self.detail)
    }
}

fn unit(d: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Violation count over Monte Carlo trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coverage {
    pub trials: u64,
    pub violations: u64,
}

impl Coverage {
    pub fn rate(&self) -> f64 {
        self.violations as f64 / self.trials.max(1) as f64
    }
}

fn count(trials: u64, seed: u64, f: impl Fn(&mut ChaCha8Rng) -> Result<bool> + Sync) -> Result<Coverage> {
    let hits = (0..trials)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(replicate_seed(seed, k));
            f(&mut rng).map(u64::from)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Coverage {
        trials,
        violations: hits.iter().sum(),
    })
}

/// Per-learner deviation event for the balancing test.
///
/// Three learners with gaps `0, 0.1, 0.3` follow a fixed selection schedule;
/// every round draws `μ*_t ~ U[0.5, 1]` and a Bernoulli reward with mean
/// `μ*_t − gap`. A trial violates the event if at some round some learner has
/// `|n_i E[μ*] − U_i − Reg_i| > 2 · hoeffding_radius(n_i, M, δ)`.
pub fn event_g_coverage(trials: u64, horizon: u64, delta: f64, seed: u64) -> Result<Coverage> {
    const GAPS: [f64; 3] = [0.0, 0.1, 0.3];
    let m = GAPS.len();
    let mut radius = vec![0.0; horizon as usize + 1];
    for (n, r) in radius.iter_mut().enumerate().skip(1) {
        *r = 2.0 * hoeffding_radius(n as u64, m, delta)?;
    }
    // Fixed schedule: learner 0 half the time, the others a quarter each.
    let schedule = |t: u64| match t % 4 {
        0 | 2 => 0,
        1 => 1,
        _ => 2,
    };
    count(trials, seed, |rng| {
        let mut n = [0u64; 3];
        let mut dev = [0.0f64; 3];
        for t in 0..horizon {
            let i = schedule(t);
            let mu_star: f64 = rng.random_range(0.5..1.0);
            let reward = if rng.random::<f64>() < mu_star - GAPS[i] { 1.0 } else { 0.0 };
            n[i] += 1;
            // n_i E[μ*] − U_i − Reg_i accumulates E[μ*] − reward − gap.
            dev[i] += 0.75 - reward - GAPS[i];
            if dev[i].abs() > radius[n[i] as usize] {
                return Ok(true);
            }
        }
        Ok(false)
    })
}

/// Coverage of [`playcount_upper_bound`] for `learners` learners sampled
/// uniformly at random over `horizon` rounds.
pub fn playcount_coverage(trials: u64, horizon: u64, learners: usize, delta: f64, seed: u64) -> Result<Coverage> {
    let p = 1.0 / learners as f64;
    let bound = (1..=horizon)
        .map(|t| playcount_upper_bound(t, p, learners, delta))
        .collect::<Result<Vec<_>>>()?;
    count(trials, seed, |rng| {
        let mut n = vec![0u64; learners];
        for b in &bound {
            let i = rng.random_range(0..learners);
            n[i] += 1;
            if n[i] as f64 > *b {
                return Ok(true);
            }
        }
        Ok(false)
    })
}

/// Deterministic elliptical potential inequality on random streams with
/// random dimension, ridge, cap and vector scales.
pub fn elliptical_streams(streams: u64, seed: u64) -> Result<Coverage> {
    count(streams, seed, |rng| {
        let d = rng.random_range(1..=6);
        let len = rng.random_range(1..=200);
        let lambda = rng.random_range(0.1..2.0);
        let b = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let scale: f64 = rng.random_range(0.05..3.0);
        let xs: Vec<Vec<f64>> = (0..len)
            .map(|_| {
                let r = scale * rng.random::<f64>();
                unit(d, rng).into_iter().map(|x| x * r).collect()
            })
            .collect();
        let v0 = DMatrix::identity(d, d) * lambda;
        Ok(!elliptical_potential_check(&xs, &v0, b)?.holds)
    })
}

/// Coverage of [`randomized_elliptical_bound`]: unit vectors enter `V` only
/// when a Bernoulli(`p`) gate fires, while the potential sums over every
/// round. Checked at every `n`.
pub fn randomized_elliptical_coverage(
    trials: u64,
    rounds: u64,
    dim: usize,
    p: f64,
    delta: f64,
    seed: u64,
) -> Result<Coverage> {
    let b = 1.0;
    count(trials, seed, |rng| {
        let mut acc = GramAccumulator::ridge(dim, 1.0)?;
        let mut lhs = 0.0;
        for n in 1..=rounds {
            let x = unit(dim, rng);
            lhs += acc.inv_quad(&x).min(b);
            if rng.random::<f64>() < p {
                acc.update(&x);
            }
            let rhs = randomized_elliptical_bound(n, b, p, delta, acc.log_det_ratio().exp())?;
            if lhs > rhs {
                return Ok(true);
            }
        }
        Ok(false)
    })
}

/// Result of the OFUL equivalence and regret check for one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OfulReport {
    pub dim: usize,
    /// Largest relative gap between incremental and from-scratch estimates.
    pub max_rel_error: f64,
    pub contained: bool,
    pub regret: f64,
    pub bound: f64,
}

fn oful_env(theta: Vec<f64>, sigma: f64, seed: u64) -> Result<LinearBanditEnv> {
    LinearBanditEnv::new(
        EnvSpec {
            theta_star: theta,
            model: ActionModel::IidUnitSphere { count: 10 },
            noise: Noise::Gaussian { sigma },
            clip: false,
            eps_star: 0.0,
            action_norm: 1.0,
        },
        seed,
    )
}

/// Runs OFUL alone for `rounds` steps, comparing its estimate with a
/// from-scratch ridge solve every `check_every` steps and tracking whether
/// `θ*` stayed in the confidence set.
pub fn oful_equivalence(dim: usize, rounds: u64, check_every: u64, seed: u64) -> Result<OfulReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta_star = unit(dim, &mut rng);
    let mut env = oful_env(theta_star.clone(), 0.1, seed)?;
    let mut oful = Oful::new(OfulParams::new(dim))?;
    let lambda = oful.params().lambda;
    let mut history: Vec<(Vec<f64>, f64)> = Vec::with_capacity(rounds as usize);
    let mut max_rel_error: f64 = 0.0;
    let mut contained = true;
    let mut regret = 0.0;
    for t in 1..=rounds {
        let actions = env.emit_round(t)?;
        let idx = oful.propose(actions)?.index;
        let x = actions.row(idx).to_vec();
        let mu_star = env.optimal_value();
        let (reward, mean) = env.realize(idx)?;
        regret += mu_star - mean;
        oful.observe(&x, reward)?;
        history.push((x, reward));
        contained &= oful.contains(&theta_star);
        if t % check_every == 0 || t == rounds {
            let mut v = DMatrix::<f64>::identity(dim, dim) * lambda;
            let mut y = DVector::<f64>::zeros(dim);
            for (x, r) in &history {
                let xv = DVector::from_column_slice(x);
                v += &xv * xv.transpose();
                y += xv * *r;
            }
            let scratch = v
                .cholesky()
                .expect("ridge Gram matrix is positive definite")
                .solve(&y);
            let diff: f64 = oful
                .theta()
                .iter()
                .zip(scratch.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            max_rel_error = max_rel_error.max(diff / scratch.norm().max(1e-12));
        }
    }
    let p = oful.params();
    let bound = oful_regret_bound(oful.beta_max(), dim, rounds, p.action_norm, p.lambda);
    Ok(OfulReport {
        dim,
        max_rel_error,
        contained,
        regret,
        bound,
    })
}

/// Fraction of OFUL runs in which `θ*` left the confidence set at some round.
pub fn oful_containment(trials: u64, dim: usize, rounds: u64, seed: u64) -> Result<Coverage> {
    count(trials, seed, |rng| {
        let theta = unit(dim, rng);
        let mut env = oful_env(theta.clone(), 0.1, rng.random())?;
        let mut oful = Oful::new(OfulParams::new(dim))?;
        for t in 1..=rounds {
            let actions = env.emit_round(t)?;
            let idx = oful.propose(actions)?.index;
            let x = actions.row(idx).to_vec();
            let (reward, _) = env.realize(idx)?;
            oful.observe(&x, reward)?;
            if !oful.contains(&theta) {
                return Ok(true);
            }
        }
        Ok(false)
    })
}

/// Violations of the stochastic master's per-round invariants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct InvariantReport {
    pub rounds: u64,
    pub unbalanced: u64,
    pub play_ratio: u64,
    pub play_count: u64,
    pub active_growth: u64,
    pub inactive_played: u64,
    pub regret_mismatch: u64,
}

impl InvariantReport {
    pub fn violations(&self) -> u64 {
        self.unbalanced
            + self.play_ratio
            + self.play_count
            + self.active_growth
            + self.inactive_played
            + self.regret_mismatch
    }

    fn add(&mut self, o: &InvariantReport) {
        self.rounds += o.rounds;
        self.unbalanced += o.unbalanced;
        self.play_ratio += o.play_ratio;
        self.play_count += o.play_count;
        self.active_growth += o.active_growth;
        self.inactive_played += o.inactive_played;
        self.regret_mismatch += o.regret_mismatch;
    }
}

/// Runs the stochastic master of `cfg` on replicate `index`, checking after
/// every round that active bounds are within one of each other, the play
/// ratio bound holds for polynomial bounds, play counts sum to `t`, the
/// active set never grows, eliminated learners are never played, and the
/// reported regret matches the per-round gaps.
pub fn check_invariants(cfg: &ExperimentConfig, index: u64) -> Result<InvariantReport> {
    let seed = replicate_seed(cfg.master_seed, index);
    let mut inst = Instance::build(cfg, seed)?;
    let mut rep = InvariantReport::default();
    let mut active: Vec<bool> = vec![true; cfg.learner_count()];
    let mut regret = 0.0;
    for t in 1..=cfg.horizon {
        let r = inst.step()?;
        rep.rounds += 1;
        if !active[r.learner_id] {
            rep.inactive_played += 1;
        }
        regret += r.mu_star - r.mean;
        if (regret - r.cum_pseudo_regret).abs() > 1e-9 * regret.abs().max(1.0) {
            rep.regret_mismatch += 1;
        }
        let Master::Balancing(m) = &inst.master else {
            continue;
        };
        let state = m.state();
        if !is_balanced(state)? {
            rep.unbalanced += 1;
        }
        if !play_ratio_holds(state) {
            rep.play_ratio += 1;
        }
        if state.ledgers.iter().map(|l| l.plays).sum::<u64>() != t {
            rep.play_count += 1;
        }
        for (a, l) in active.iter_mut().zip(&state.ledgers) {
            if l.active && !*a {
                rep.active_growth += 1;
            }
            *a = l.active;
        }
    }
    Ok(rep)
}

/// Scripted scenario with mixed polynomial bounds and one bad arm, for the
/// play-ratio check.
pub fn mixed_poly_config(horizon: u64) -> ExperimentConfig {
    let mut cfg = preset("scripted-survival").expect("built-in preset");
    cfg.scenario = "scripted-mixed-poly".into();
    cfg.horizon = horizon;
    cfg.environment.actions.values = vec![0.8, 0.6, 0.3];
    cfg.learners.means = vec![0.8, 0.6, 0.8, 0.3, 0.8];
    let poly = |scale, constant, exponent| BoundConfig::Poly {
        scale,
        constant,
        exponent,
    };
    cfg.learners.bounds = vec![
        poly(1.0, 1.0, 0.5),
        poly(4.0, 1.0, 0.3),
        poly(2.0, 1.0, 0.8),
        poly(1.0, 2.0, 0.6),
        poly(8.0, 1.0, 0.4),
    ];
    cfg
}

/// Scenarios of the invariant suite with their horizons at full scale.
pub fn invariant_scenarios(scale: f64) -> Vec<ExperimentConfig> {
    let h = |t: f64| ((t * scale).round() as u64).max(10);
    let mut out = Vec::new();
    for (name, t) in [
        ("scripted-survival", 1e5),
        ("scripted-gap", 1e5),
        ("nested-dims", 2e4),
        ("kappa-tuning", 1e4),
        ("eps-misspec", 1e4),
    ] {
        let mut cfg = preset(name).expect("built-in preset");
        cfg.horizon = h(t);
        out.push(cfg);
    }
    out.push(mixed_poly_config(h(1e5)));
    out
}

/// Per-round invariants of the stochastic master on every scenario.
pub fn invariant_suite(scale: f64) -> Result<Vec<Check>> {
    let reports = invariant_scenarios(scale)
        .into_par_iter()
        .map(|cfg| check_invariants(&cfg, 0).map(|r| (cfg.scenario, r)))
        .collect::<Result<Vec<_>>>()?;
    let mut total = InvariantReport::default();
    let mut checks = Vec::new();
    for (name, r) in &reports {
        total.add(r);
        checks.push(Check::new(
            format!("invariants/{name}"),
            r.violations() == 0,
            format!("{} rounds, {} violations ({r:?})", r.rounds, r.violations()),
        ));
    }
    checks.push(Check::new(
        "invariants/all",
        total.violations() == 0,
        format!("{} rounds, {} violations", total.rounds, total.violations()),
    ));
    Ok(checks)
}

/// Monte Carlo coverage of the concentration bounds and OFUL checks.
pub fn coverage_suite(scale: f64) -> Result<Vec<Check>> {
    let n = |x: f64| ((x * scale).round() as u64).max(1);
    let delta = 0.05;
    let mut checks = Vec::new();
    let g = event_g_coverage(n(5000.0), 10_000, delta, 11)?;
    checks.push(Check::new(
        "coverage/event-g",
        g.rate() <= delta + 0.01,
        format!("{} of {} trials violated (rate {:.4})", g.violations, g.trials, g.rate()),
    ));
    let pc = playcount_coverage(n(5000.0), 10_000, 4, delta, 12)?;
    checks.push(Check::new(
        "coverage/playcount",
        pc.rate() <= delta + 0.01,
        format!("{} of {} trials violated (rate {:.4})", pc.violations, pc.trials, pc.rate()),
    ));
    let el = elliptical_streams(n(10_000.0), 13)?;
    checks.push(Check::new(
        "coverage/elliptical",
        el.violations == 0,
        format!("{} of {} streams violated", el.violations, el.trials),
    ));
    let re = randomized_elliptical_coverage(n(2000.0), 2000, 3, 0.3, delta, 14)?;
    checks.push(Check::new(
        "coverage/randomized-elliptical",
        re.rate() <= delta + 0.01,
        format!("{} of {} trials violated (rate {:.4})", re.violations, re.trials, re.rate()),
    ));
    let oc = oful_containment(n(2000.0), 3, 2000, 15)?;
    checks.push(Check::new(
        "coverage/oful-containment",
        oc.rate() <= delta,
        format!("{} of {} runs left the confidence set (rate {:.4})", oc.violations, oc.trials, oc.rate()),
    ));
    for (k, d) in [2usize, 5, 10].into_iter().enumerate() {
        let r = oful_equivalence(d, n(10_000.0).max(100), 1000, 16 + k as u64)?;
        checks.push(Check::new(
            format!("oful/d={d}"),
            r.max_rel_error <= 1e-8 && (!r.contained || r.regret <= r.bound),
            format!(
                "relative error {:.2e}, containment {}, regret {:.3} vs bound {:.3}",
                r.max_rel_error, r.contained, r.regret, r.bound
            ),
        ));
    }
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_suites_pass() {
        for c in invariant_suite(0.01).unwrap() {
            assert!(c.pass, "{c}");
        }
    }

    #[test]
    fn display_tags() {
        assert_eq!(Check::new("a", true, "ok").to_string(), "PASS a: ok");
        assert_eq!(Check::new("b", false, "no").to_string(), "FAIL b: no");
    }

    #[test]
    fn oful_small_run_matches_scratch() {
        let r = oful_equivalence(3, 500, 100, 1).unwrap();
        assert!(r.max_rel_error < 1e-8, "{r:?}");
    }
}
