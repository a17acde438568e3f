//! Experiment configuration.
//!
//! Configurations are TOML files. Unknown keys are rejected so that typos do
//! not silently fall back to defaults. See `configs/` for one file per
//! built-in scenario and [`preset`] for the same scenarios in code.

use serde::{Deserialize, Serialize};

use crate::adversarial::RmaxMode;
use crate::error::{Error, Result};

/// Which master drives the learners.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MasterKind {
    /// Regret bound balancing and elimination.
    Balancing,
    /// Randomized epoch balancing with the outer elimination loop.
    Adversarial,
    /// One learner run alone (`single_learner`).
    Single,
    /// Learners in turn, no elimination.
    RoundRobin,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: String,
    pub horizon: u64,
    #[serde(default = "one")]
    pub seeds: u64,
    #[serde(default)]
    pub master_seed: u64,
    pub master: MasterKind,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_c_scale")]
    pub c_scale: f64,
    /// Write trace rows only at rounds `2^k` and at the horizon.
    #[serde(default)]
    pub checkpoint: bool,
    /// Learner run alone for `single`.
    #[serde(default)]
    pub single_learner: usize,
    /// Learner also run alone on the same seeds, for the regret ratio.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle_learner: Option<usize>,
    /// Rounds `[t_min, t_max]` of the log-log slope fit; defaults to
    /// `[T/64, T]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slope_window: Option<[u64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    pub environment: EnvironmentConfig,
    pub learners: LearnersConfig,
    #[serde(default)]
    pub adversarial: AdversarialOptions,
}

fn one() -> u64 {
    1
}

fn default_delta() -> f64 {
    0.05
}

fn default_c_scale() -> f64 {
    2.0
}

fn default_norm() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NoiseKind {
    Gaussian,
    Bernoulli,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub dim: usize,
    /// Explicit `θ*`. When absent a direction is drawn per seed on the first
    /// `support` coordinates and scaled to `theta_norm`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub theta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub support: Option<usize>,
    #[serde(default = "default_norm")]
    pub theta_norm: f64,
    pub noise: NoiseKind,
    #[serde(default)]
    pub sigma: f64,
    #[serde(default)]
    pub clip: bool,
    #[serde(default)]
    pub eps_star: f64,
    #[serde(default = "default_norm")]
    pub action_norm: f64,
    pub actions: ActionsConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ActionsKind {
    /// `count` unit vectors drawn once per seed.
    Fixed,
    /// `count` fresh unit vectors per round.
    Sphere,
    /// Scalar arms `values`; pair with `dim = 1` and `theta = [1.0]`.
    Arms,
    /// `count` unit vectors hashed from the round index.
    HashedSphere,
    /// Hashed sphere on odd rounds, `{±e_i}` on even rounds.
    Alternating,
    /// Hashed sphere, with the `reveal` set every `reveal_every`-th round.
    Reveal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActionsConfig {
    pub kind: ActionsKind,
    #[serde(default = "one_usize")]
    pub count: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub values: Vec<f64>,
    #[serde(default)]
    pub salt: u64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reveal: Vec<Vec<f64>>,
    #[serde(default = "two")]
    pub reveal_every: u64,
}

fn one_usize() -> usize {
    1
}

fn two() -> u64 {
    2
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    /// OFUL on the first `2^i` coordinates, `i = 1..=count`.
    NestedDims,
    /// OFUL with confidence scale `κ_i = 2^{1-i}`.
    KappaGrid,
    /// OFUL with misspecification allowance `ε_i = 2^{1-i}/√d`.
    EpsGrid,
    /// Fixed-mean scripted learners.
    Scripted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnersConfig {
    pub family: Family,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(default = "default_norm")]
    pub lambda: f64,
    /// Noise level assumed by the learners; defaults to the environment's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default = "default_norm")]
    pub param_norm: f64,
    /// Overrides the common constant `C` of the presumed bounds.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_constant: Option<f64>,
    #[serde(default = "default_norm")]
    pub eps_scale: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub means: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bounds: Vec<BoundConfig>,
    /// Lower-confidence values reported by scripted learners.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reported_lower: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BoundConfig {
    Poly {
        scale: f64,
        constant: f64,
        exponent: f64,
    },
    SqrtLog {
        scale: f64,
        constant: f64,
        delta: f64,
    },
    EpsLinear {
        c1: f64,
        c2: f64,
        eps: f64,
    },
    DataDependent {
        cap: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RmaxConfig {
    Unit,
    NormProduct,
}

impl From<RmaxConfig> for RmaxMode {
    fn from(r: RmaxConfig) -> Self {
        match r {
            RmaxConfig::Unit => RmaxMode::Unit,
            RmaxConfig::NormProduct => RmaxMode::NormProduct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdversarialOptions {
    #[serde(default = "unit")]
    pub rmax_mode: RmaxConfig,
    #[serde(default)]
    pub broadcast: bool,
    #[serde(default)]
    pub reset_on_epoch: bool,
    #[serde(default)]
    pub filter: bool,
}

fn unit() -> RmaxConfig {
    RmaxConfig::Unit
}

impl Default for AdversarialOptions {
    fn default() -> Self {
        Self {
            rmax_mode: RmaxConfig::Unit,
            broadcast: false,
            reset_on_epoch: false,
            filter: false,
        }
    }
}

fn config_err<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Config(msg.into()))
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    /// Number of learners the configuration builds.
    pub fn learner_count(&self) -> usize {
        match self.learners.family {
            Family::Scripted => self.learners.means.len(),
            _ => self.learners.count.unwrap_or(0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return config_err("horizon must be at least 1");
        }
        if self.seeds == 0 {
            return config_err("seeds must be at least 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return config_err(format!("delta must lie in (0, 1), got {}", self.delta));
        }
        if !(self.c_scale > 0.0) {
            return config_err("c_scale must be positive");
        }
        let env = &self.environment;
        if env.dim == 0 {
            return config_err("environment.dim must be at least 1");
        }
        if let Some(theta) = &env.theta {
            if theta.len() != env.dim {
                return config_err("environment.theta length must equal environment.dim");
            }
        } else {
            let s = env.support.unwrap_or(env.dim);
            if s == 0 || s > env.dim {
                return config_err("environment.support must lie in [1, dim]");
            }
        }
        if env.noise == NoiseKind::Gaussian && !(env.sigma >= 0.0) {
            return config_err("environment.sigma must be non-negative");
        }
        let a = &env.actions;
        match a.kind {
            ActionsKind::Arms if a.values.is_empty() => return config_err("arms need values"),
            ActionsKind::Arms if env.dim != 1 => return config_err("arms need dim = 1"),
            ActionsKind::Reveal if a.reveal.is_empty() => return config_err("reveal set is empty"),
            ActionsKind::Reveal if a.reveal_every < 2 => return config_err("reveal_every must be >= 2"),
            _ => {}
        }
        let l = &self.learners;
        let m = self.learner_count();
        if m == 0 {
            return config_err("need at least one learner (learners.count or learners.means)");
        }
        match l.family {
            Family::Scripted => {
                if l.bounds.len() != m {
                    return config_err("scripted learners need one bound per mean");
                }
                if !l.reported_lower.is_empty() && l.reported_lower.len() != m {
                    return config_err("reported_lower must have one entry per mean");
                }
            }
            Family::NestedDims => {
                if (1usize << m) > env.dim {
                    return config_err(format!(
                        "nested dims need dim >= 2^count = {}",
                        1usize << m
                    ));
                }
            }
            Family::KappaGrid | Family::EpsGrid => {}
        }
        if self.master == MasterKind::Single && self.single_learner >= m {
            return config_err("single_learner out of range");
        }
        if let Some([lo, hi]) = self.slope_window {
            if lo == 0 || hi <= lo || hi > self.horizon {
                return config_err("slope_window must satisfy 1 <= t_min < t_max <= horizon");
            }
        }
        if let Some(o) = self.oracle_learner {
            if o >= m {
                return config_err("oracle_learner out of range");
            }
        }
        Ok(())
    }
}

/// Names of the built-in scenarios.
pub const PRESETS: &[&str] = &[
    "linucb-grid",
    "nested-dims",
    "kappa-tuning",
    "eps-misspec",
    "scripted-survival",
    "scripted-gap",
    "adversarial-wellspec",
    "adversarial-nested",
];

fn env_base(dim: usize, kind: ActionsKind, count: usize) -> EnvironmentConfig {
    EnvironmentConfig {
        dim,
        theta: None,
        support: None,
        theta_norm: 1.0,
        noise: NoiseKind::Gaussian,
        sigma: 0.1,
        clip: false,
        eps_star: 0.0,
        action_norm: 1.0,
        actions: ActionsConfig {
            kind,
            count,
            values: vec![],
            salt: 0,
            reveal: vec![],
            reveal_every: 2,
        },
    }
}

fn learners_base(family: Family, count: usize) -> LearnersConfig {
    LearnersConfig {
        family,
        count: Some(count),
        lambda: 1.0,
        sigma: None,
        param_norm: 1.0,
        bound_constant: None,
        eps_scale: 1.0,
        means: vec![],
        bounds: vec![],
        reported_lower: vec![],
    }
}

fn base(name: &str, horizon: u64, seeds: u64, master: MasterKind, env: EnvironmentConfig, learners: LearnersConfig) -> ExperimentConfig {
    ExperimentConfig {
        scenario: name.to_string(),
        horizon,
        seeds,
        master_seed: 1,
        master,
        delta: 0.05,
        c_scale: 2.0,
        checkpoint: false,
        single_learner: 0,
        oracle_learner: None,
        slope_window: None,
        out_dir: None,
        environment: env,
        learners,
        adversarial: AdversarialOptions::default(),
    }
}

/// A built-in scenario by name.
pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let poly_half = BoundConfig::Poly {
        scale: 1.0,
        constant: 1.0,
        exponent: 0.5,
    };
    let cfg = match name {
        "linucb-grid" => {
            let mut env = env_base(10, ActionsKind::Fixed, 100);
            env.sigma = 0.1;
            let mut l = learners_base(Family::KappaGrid, 7);
            l.sigma = Some(1.0);
            base(name, 10_000, 10, MasterKind::Balancing, env, l)
        }
        "nested-dims" => {
            let mut env = env_base(16, ActionsKind::Fixed, 100);
            env.support = Some(2);
            let mut c = base(name, 1 << 16, 20, MasterKind::Balancing, env, learners_base(Family::NestedDims, 4));
            c.oracle_learner = Some(0);
            c
        }
        "kappa-tuning" => {
            let mut env = env_base(10, ActionsKind::Fixed, 100);
            env.sigma = 0.1;
            let mut l = learners_base(Family::KappaGrid, 7);
            l.sigma = Some(1.0);
            let mut c = base(name, 10_000, 100, MasterKind::Balancing, env, l);
            c.oracle_learner = Some(0);
            c
        }
        "eps-misspec" => {
            let mut env = env_base(4, ActionsKind::Fixed, 50);
            env.eps_star = 0.125;
            let l = learners_base(Family::EpsGrid, 5);
            base(name, 10_000, 100, MasterKind::Balancing, env, l)
        }
        "scripted-survival" => {
            let mut env = env_base(1, ActionsKind::Arms, 1);
            env.theta = Some(vec![1.0]);
            env.noise = NoiseKind::Bernoulli;
            env.actions.values = vec![0.7];
            let mut l = learners_base(Family::Scripted, 3);
            l.count = None;
            l.means = vec![0.7, 0.7, 0.7];
            l.bounds = vec![
                poly_half.clone(),
                BoundConfig::Poly {
                    scale: 2.0,
                    constant: 1.0,
                    exponent: 0.5,
                },
                BoundConfig::Poly {
                    scale: 1.0,
                    constant: 1.0,
                    exponent: 0.75,
                },
            ];
            base(name, 10_000, 200, MasterKind::Balancing, env, l)
        }
        "scripted-gap" => {
            let mut env = env_base(1, ActionsKind::Arms, 2);
            env.theta = Some(vec![1.0]);
            env.noise = NoiseKind::Bernoulli;
            env.actions.values = vec![0.75, 0.25];
            let mut l = learners_base(Family::Scripted, 2);
            l.count = None;
            l.means = vec![0.75, 0.25];
            l.bounds = vec![poly_half.clone(), poly_half];
            base(name, 10_000, 200, MasterKind::Balancing, env, l)
        }
        "adversarial-wellspec" => {
            let mut env = env_base(8, ActionsKind::Alternating, 10);
            env.support = Some(2);
            base(name, 10_000, 200, MasterKind::Adversarial, env, learners_base(Family::NestedDims, 3))
        }
        "adversarial-nested" => {
            let mut env = env_base(8, ActionsKind::Reveal, 10);
            env.theta = Some(vec![0.5, 0.5, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0]);
            // Truncated to two coordinates the reveal actions look like
            // (0.5, 0.5) and (0, 0), but the second has the higher mean.
            env.actions.reveal = vec![
                vec![0.5, 0.5, -0.5, -0.5, 0.0, 0.0, 0.0, 0.0],
                vec![0.0, 0.0, 0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
            ];
            env.actions.reveal_every = 2;
            base(name, 1 << 16, 100, MasterKind::Adversarial, env, learners_base(Family::NestedDims, 3))
        }
        other => {
            return config_err(format!(
                "unknown preset '{other}'; known: {}",
                PRESETS.join(", ")
            ))
        }
    };
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_toml() {
        for name in PRESETS {
            let c = preset(name).unwrap();
            let back = ExperimentConfig::from_toml(&c.to_toml()).unwrap();
            assert_eq!(back, c, "{name}");
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut text = preset("scripted-gap").unwrap().to_toml();
        text = text.replacen("horizon", "horizn = 3\nhorizon", 1);
        assert!(matches!(ExperimentConfig::from_toml(&text), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_rejected() {
        let mut c = preset("scripted-gap").unwrap();
        c.delta = 1.5;
        assert!(c.validate().is_err());
        let mut c = preset("nested-dims").unwrap();
        c.learners.count = Some(5);
        assert!(c.validate().is_err());
        assert!(preset("nope").is_err());
    }
}
