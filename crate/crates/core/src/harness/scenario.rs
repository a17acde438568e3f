//! Turning a configuration into a runnable environment and master.

use crate::adversarial::{AdversarialConfig, EpochBalancing, RmaxMode};
use crate::balancing::{Balancing, MasterConfig};
use crate::bounds::CandidateBound;
use crate::env::{ActionModel, ActionSet, EnvSpec, LinearBanditEnv, Noise, Schedule};
use crate::error::{Error, Result};
use crate::harness::config::{
    ActionsKind, BoundConfig, ExperimentConfig, Family, MasterKind, NoiseKind,
};
use crate::ledger::RegretAccount;
use crate::learners::{Learner, Oful, OfulParams, Scripted};
use crate::math::norm;
use crate::rng::{substream, Stream};
use crate::trace::{LearnerStat, RoundTrace};

/// Common constant of the `√n` presumed bounds of OFUL learners:
/// `2 (σ + √λ S) sqrt((1 + L²/λ) ln((1 + T L²/λ)/δ) ln((λ + T L)/λ))`.
pub fn oful_bound_constant(sigma: f64, lambda: f64, param_norm: f64, action_norm: f64, horizon: u64, delta: f64) -> f64 {
    let t = horizon as f64;
    let l2 = action_norm * action_norm;
    2.0 * (sigma + lambda.sqrt() * param_norm)
        * ((1.0 + l2 / lambda) * ((1.0 + t * l2 / lambda) / delta).ln() * ((lambda + t * action_norm) / lambda).ln()).sqrt()
}

/// Builds the environment of replicate `seed`.
pub fn build_env(cfg: &ExperimentConfig, seed: u64) -> Result<LinearBanditEnv> {
    LinearBanditEnv::new(env_spec(cfg, seed)?, seed)
}

pub fn env_spec(cfg: &ExperimentConfig, seed: u64) -> Result<EnvSpec> {
    let e = &cfg.environment;
    let d = e.dim;
    let mut scenario_rng = substream(seed, Stream::Scenario);
    let theta = match &e.theta {
        Some(t) => t.clone(),
        None => {
            let s = e.support.unwrap_or(d);
            let dir = random_unit(s, &mut scenario_rng);
            let mut t = vec![0.0; d];
            for (x, v) in t.iter_mut().zip(dir) {
                *x = v * e.theta_norm;
            }
            t
        }
    };
    let a = &e.actions;
    let hashed = Schedule::HashedSphere {
        count: a.count,
        dim: d,
        salt: a.salt,
    };
    let model = match a.kind {
        ActionsKind::Fixed => {
            let rows: Vec<Vec<f64>> = (0..a.count).map(|_| random_unit(d, &mut scenario_rng)).collect();
            ActionModel::FixedSet(ActionSet::from_rows(&rows)?)
        }
        ActionsKind::Sphere => ActionModel::IidUnitSphere { count: a.count },
        ActionsKind::Arms => ActionModel::FixedSet(ActionSet::new(1, a.values.clone())?),
        ActionsKind::HashedSphere => ActionModel::Adversarial(hashed),
        ActionsKind::Alternating => {
            let mut rows = Vec::with_capacity(2 * d);
            for i in 0..d {
                for sign in [1.0, -1.0] {
                    let mut v = vec![0.0; d];
                    v[i] = sign;
                    rows.push(v);
                }
            }
            let basis = Schedule::Cycle(vec![ActionSet::from_rows(&rows)?]);
            ActionModel::Adversarial(Schedule::Interleave(vec![hashed, basis]))
        }
        ActionsKind::Reveal => {
            let reveal = Schedule::Cycle(vec![ActionSet::from_rows(&a.reveal)?]);
            let mut parts = vec![hashed; (a.reveal_every - 1) as usize];
            parts.push(reveal);
            ActionModel::Adversarial(Schedule::Interleave(parts))
        }
    };
    let noise = match e.noise {
        NoiseKind::Gaussian => Noise::Gaussian { sigma: e.sigma },
        NoiseKind::Bernoulli => Noise::Bernoulli,
    };
    let spec = EnvSpec {
        theta_star: theta,
        model,
        noise,
        clip: e.clip,
        eps_star: e.eps_star,
        action_norm: e.action_norm,
    };
    spec.validate().map_err(|err| Error::Config(err.to_string()))?;
    Ok(spec)
}

fn random_unit(d: usize, rng: &mut impl rand::Rng) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

fn bound_from(b: &BoundConfig) -> Result<CandidateBound> {
    match *b {
        BoundConfig::Poly {
            scale,
            constant,
            exponent,
        } => CandidateBound::poly(scale, constant, exponent),
        BoundConfig::SqrtLog {
            scale,
            constant,
            delta,
        } => CandidateBound::sqrt_log(scale, constant, delta),
        BoundConfig::EpsLinear { c1, c2, eps } => CandidateBound::eps_linear(c1, c2, eps),
        BoundConfig::DataDependent { cap } => CandidateBound::data_dependent(cap),
    }
}

/// Assumed noise level of OFUL learners.
fn assumed_sigma(cfg: &ExperimentConfig) -> f64 {
    cfg.learners.sigma.unwrap_or(match cfg.environment.noise {
        NoiseKind::Gaussian => cfg.environment.sigma,
        NoiseKind::Bernoulli => 0.5,
    })
}

/// The learners of a configuration with their presumed bounds.
pub fn build_learners(cfg: &ExperimentConfig) -> Result<(Vec<Box<dyn Learner>>, Vec<CandidateBound>)> {
    let l = &cfg.learners;
    let e = &cfg.environment;
    let m = cfg.learner_count();
    let sigma = assumed_sigma(cfg);
    let rmax = RmaxMode::from(cfg.adversarial.rmax_mode).value(e.action_norm, l.param_norm);
    let c = l.bound_constant.unwrap_or_else(|| {
        oful_bound_constant(sigma, l.lambda, l.param_norm, e.action_norm, cfg.horizon, cfg.delta)
    });
    let oful = |dim: usize| {
        let mut p = OfulParams::new(dim);
        p.lambda = l.lambda;
        p.sigma = sigma;
        p.param_norm = l.param_norm;
        p.action_norm = e.action_norm;
        p.delta = cfg.delta;
        p.reward_max = rmax;
        p.eps_scale = l.eps_scale;
        p
    };
    let mut learners: Vec<Box<dyn Learner>> = Vec::with_capacity(m);
    let mut bounds = Vec::with_capacity(m);
    match l.family {
        Family::NestedDims => {
            for i in 1..=m {
                let d = 1usize << i;
                learners.push(Box::new(Oful::new(oful(d))?));
                bounds.push(CandidateBound::poly(d as f64, c, 0.5)?);
            }
        }
        Family::KappaGrid => {
            // Scaled learners presume `κ_i d ln(T) √n`, so the default
            // constant is `ln T` rather than the full OFUL constant.
            let c = l.bound_constant.unwrap_or((cfg.horizon as f64).ln().max(1.0));
            let d = e.dim as f64;
            let kappa_min = 2f64.powi(1 - m as i32);
            for i in 1..=m {
                let mut p = oful(e.dim);
                p.kappa = 2f64.powi(1 - i as i32);
                learners.push(Box::new(Oful::new(p)?));
                // Short horizons can push the common constant below 1;
                // it is floored there.
                bounds.push(CandidateBound::poly(
                    2f64.powi((m - i) as i32),
                    (kappa_min * d * c).max(1.0),
                    0.5,
                )?);
            }
        }
        Family::EpsGrid => {
            let d = e.dim as f64;
            for i in 1..=m {
                let eps = 2f64.powi(1 - i as i32) / d.sqrt();
                let mut p = oful(e.dim);
                p.eps = eps;
                learners.push(Box::new(Oful::new(p)?));
                bounds.push(CandidateBound::eps_linear(c * d, c * d.sqrt(), eps)?);
            }
        }
        Family::Scripted => {
            for (i, (&mean, b)) in l.means.iter().zip(&l.bounds).enumerate() {
                let mut s = Scripted::new(mean)?;
                if let Some(&lower) = l.reported_lower.get(i) {
                    s = s.reporting_lower(lower);
                }
                learners.push(Box::new(s));
                bounds.push(bound_from(b)?);
            }
        }
    }
    Ok((learners, bounds))
}

/// Learners played in turn without any test.
pub struct RoundRobin {
    learners: Vec<Box<dyn Learner>>,
    bounds: Vec<CandidateBound>,
    plays: Vec<u64>,
    rewards: Vec<f64>,
    regret: RegretAccount,
    round: u64,
}

impl RoundRobin {
    pub fn new(learners: Vec<Box<dyn Learner>>, bounds: Vec<CandidateBound>) -> Self {
        let m = learners.len();
        Self {
            learners,
            bounds,
            plays: vec![0; m],
            rewards: vec![0.0; m],
            regret: RegretAccount::new(m),
            round: 0,
        }
    }

    pub fn run_round(&mut self, env: &mut LinearBanditEnv) -> Result<RoundTrace> {
        self.round += 1;
        let t = self.round;
        let i = ((t - 1) % self.learners.len() as u64) as usize;
        let actions = env.emit_round(t)?;
        let p = self.learners[i].propose(actions)?;
        let action = actions.row(p.index).to_vec();
        let mu_star = env.optimal_value();
        let (reward, mean) = env.realize(p.index)?;
        self.learners[i].observe(&action, reward)?;
        self.regret.update(i, mu_star, mean)?;
        self.plays[i] += 1;
        self.rewards[i] += reward;
        if let CandidateBound::DataDependent(r) = &mut self.bounds[i] {
            match self.learners[i].running_bound() {
                Some(v) => r.sync(v, self.plays[i]),
                None => r.push(f64::NAN),
            }
        }
        let learners = (0..self.learners.len())
            .map(|j| {
                Ok(LearnerStat {
                    plays: self.plays[j],
                    reward_sum: self.rewards[j],
                    bound: self.bounds[j].evaluate(self.plays[j])?,
                    active: true,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RoundTrace {
            t,
            learner_id: i,
            action_index: p.index,
            reward,
            mu_star,
            mean,
            cum_pseudo_regret: self.regret.total(),
            learners,
            eliminated: vec![],
            epoch_ended: false,
        })
    }

    pub fn regret(&self) -> &RegretAccount {
        &self.regret
    }
}

/// Any of the supported masters.
pub enum Master {
    Balancing(Balancing),
    Adversarial(EpochBalancing),
    RoundRobin(RoundRobin),
}

impl Master {
    pub fn run_round(&mut self, env: &mut LinearBanditEnv) -> Result<RoundTrace> {
        match self {
            Master::Balancing(m) => m.run_round(env),
            Master::Adversarial(m) => m.run_round(env),
            Master::RoundRobin(m) => m.run_round(env),
        }
    }

    pub fn regret(&self) -> &RegretAccount {
        match self {
            Master::Balancing(m) => m.regret(),
            Master::Adversarial(m) => m.regret(),
            Master::RoundRobin(m) => m.regret(),
        }
    }

    pub fn diagnostics(&self) -> &[String] {
        match self {
            Master::Balancing(m) => &m.state().diagnostics,
            Master::Adversarial(m) => &m.diagnostics,
            Master::RoundRobin(_) => &[],
        }
    }
}

/// One replicate: an environment and the master acting in it.
pub struct Instance {
    pub env: LinearBanditEnv,
    pub master: Master,
}

impl Instance {
    /// The configured master on replicate seed `seed`.
    pub fn build(cfg: &ExperimentConfig, seed: u64) -> Result<Self> {
        let env = build_env(cfg, seed)?;
        let (learners, bounds) = build_learners(cfg)?;
        let master = match cfg.master {
            MasterKind::Balancing => Master::Balancing(Balancing::new(learners, bounds, master_config(cfg))?),
            MasterKind::Adversarial => {
                let sigma_width = match cfg.environment.noise {
                    NoiseKind::Gaussian if !cfg.environment.clip => 2.0 * cfg.environment.sigma,
                    _ => 1.0,
                };
                let ac = AdversarialConfig {
                    delta: cfg.delta,
                    width: sigma_width,
                    broadcast: cfg.adversarial.broadcast,
                    reset_on_epoch: cfg.adversarial.reset_on_epoch,
                    filter: cfg.adversarial.filter,
                };
                Master::Adversarial(EpochBalancing::new(
                    learners,
                    bounds,
                    ac,
                    substream(seed, Stream::MasterSampling),
                )?)
            }
            MasterKind::Single => return Self::single(cfg, seed, cfg.single_learner),
            MasterKind::RoundRobin => Master::RoundRobin(RoundRobin::new(learners, bounds)),
        };
        Ok(Self { env, master })
    }

    /// Learner `index` of the configuration run alone on replicate `seed`.
    pub fn single(cfg: &ExperimentConfig, seed: u64, index: usize) -> Result<Self> {
        let env = build_env(cfg, seed)?;
        let (mut learners, mut bounds) = build_learners(cfg)?;
        if index >= learners.len() {
            return Err(Error::Config(format!("learner {index} out of range")));
        }
        let learner = learners.swap_remove(index);
        let bound = bounds.swap_remove(index);
        let master = Master::Balancing(Balancing::new(vec![learner], vec![bound], master_config(cfg))?);
        Ok(Self { env, master })
    }

    pub fn step(&mut self) -> Result<RoundTrace> {
        self.master.run_round(&mut self.env)
    }
}

/// Balancing test settings: radii stretched to `1 + 2σ` for unclipped
/// Gaussian rewards.
pub fn master_config(cfg: &ExperimentConfig) -> MasterConfig {
    let width = match cfg.environment.noise {
        NoiseKind::Gaussian if !cfg.environment.clip => 1.0 + 2.0 * cfg.environment.sigma,
        _ => 1.0,
    };
    MasterConfig {
        delta: cfg.delta,
        c_scale: cfg.c_scale,
        width,
    }
}
