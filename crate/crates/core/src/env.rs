//! Synthetic linear bandit environments with known ground truth.
//!
//! Each round the environment emits an [`ActionSet`], knows the conditional
//! mean of every action in it, and hence the optimal value `μ*_t` exactly.
//! Learners only ever see actions and realized rewards; the means feed the
//! regret account.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{param, Error, Result};
use crate::math::{dot, norm, TOLERANCE};
use crate::rng::{mix64, substream, Stream};

/// A finite set of actions stored as contiguous rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionSet {
    dim: usize,
    data: Vec<f64>,
}

impl ActionSet {
    pub fn new(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return param("action dimension must be at least 1");
        }
        if data.len() % dim != 0 {
            return param(format!(
                "action data length {} is not a multiple of dimension {dim}",
                data.len()
            ));
        }
        Ok(Self { dim, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let Some(first) = rows.first() else {
            return param("action set needs at least one action");
        };
        let dim = first.len();
        let mut data = Vec::with_capacity(dim * rows.len());
        for r in rows {
            if r.len() != dim {
                return param("all actions must have the same dimension");
            }
            data.extend_from_slice(r);
        }
        Self::new(dim, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    fn max_norm(&self) -> f64 {
        self.rows().map(norm).fold(0.0, f64::max)
    }
}

/// Reward noise around the conditional mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    Gaussian { sigma: f64 },
    /// Reward is 1 with probability equal to the mean, else 0.
    Bernoulli,
}

impl Noise {
    /// Width of the interval a unit-range radius must be stretched to:
    /// `2σ` for Gaussian noise, 1 for bounded rewards.
    pub fn width(&self, clipped: bool) -> f64 {
        match self {
            Noise::Gaussian { sigma } if !clipped => 2.0 * sigma,
            _ => 1.0,
        }
    }
}

/// Deterministic round-indexed action generators.
#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    /// `sets[(t - 1) mod len]`.
    Cycle(Vec<ActionSet>),
    /// `count` unit vectors that are a pure hash of `(salt, t)`.
    HashedSphere { count: usize, dim: usize, salt: u64 },
    /// `parts[(t - 1) mod len]` evaluated at `t`.
    Interleave(Vec<Schedule>),
}

impl Schedule {
    pub fn generate(&self, t: u64) -> ActionSet {
        match self {
            Schedule::Cycle(sets) => sets[((t - 1) % sets.len() as u64) as usize].clone(),
            Schedule::HashedSphere { count, dim, salt } => {
                let mut rng = ChaCha8Rng::seed_from_u64(mix64(salt ^ mix64(t)));
                sphere_set(*count, *dim, &mut rng)
            }
            Schedule::Interleave(parts) => parts[((t - 1) % parts.len() as u64) as usize].generate(t),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Schedule::Cycle(sets) if sets.is_empty() => param("cycle schedule needs at least one set"),
            Schedule::Cycle(sets) => {
                if sets.iter().any(|s| s.is_empty() || s.dim() != sets[0].dim()) {
                    return param("cycle sets must be non-empty and share a dimension");
                }
                Ok(())
            }
            Schedule::HashedSphere { count, dim, .. } => {
                if *count == 0 || *dim == 0 {
                    return param("hashed sphere needs positive count and dimension");
                }
                Ok(())
            }
            Schedule::Interleave(parts) => {
                if parts.is_empty() {
                    return param("interleave needs at least one schedule");
                }
                parts.iter().try_for_each(Schedule::validate)
            }
        }
    }

    fn dim(&self) -> usize {
        match self {
            Schedule::Cycle(sets) => sets[0].dim(),
            Schedule::HashedSphere { dim, .. } => *dim,
            Schedule::Interleave(parts) => parts[0].dim(),
        }
    }

    fn max_norm(&self) -> f64 {
        match self {
            Schedule::Cycle(sets) => sets.iter().map(ActionSet::max_norm).fold(0.0, f64::max),
            Schedule::HashedSphere { .. } => 1.0,
            Schedule::Interleave(parts) => parts.iter().map(Schedule::max_norm).fold(0.0, f64::max),
        }
    }
}

fn sphere_set(count: usize, dim: usize, rng: &mut impl Rng) -> ActionSet {
    let mut data = Vec::with_capacity(count * dim);
    for _ in 0..count {
        loop {
            let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
            let n = norm(&v);
            if n > 1e-12 {
                data.extend(v.iter().map(|x| x / n));
                break;
            }
        }
    }
    ActionSet { dim, data }
}

/// How action sets are produced each round.
#[derive(Debug, Clone, PartialEq)]
pub enum ActionModel {
    FixedSet(ActionSet),
    /// `count` fresh uniform unit vectors per round from the context stream.
    IidUnitSphere { count: usize },
    Adversarial(Schedule),
}

impl ActionModel {
    /// True when action sets are i.i.d. across rounds.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, ActionModel::Adversarial(_))
    }
}

/// Static description of an environment.
#[derive(Debug, Clone, PartialEq)]
pub struct EnvSpec {
    pub theta_star: Vec<f64>,
    pub model: ActionModel,
    pub noise: Noise,
    /// Clip rewards to `[0, 1]`.
    pub clip: bool,
    /// Sup-norm of the additive perturbation of expected rewards.
    pub eps_star: f64,
    /// Declared bound on action norms.
    pub action_norm: f64,
}

impl EnvSpec {
    pub fn dim(&self) -> usize {
        self.theta_star.len()
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.dim();
        if d == 0 {
            return param("theta_star must be non-empty");
        }
        if !(self.eps_star >= 0.0 && self.eps_star.is_finite()) {
            return param(format!("eps_star must be non-negative, got {}", self.eps_star));
        }
        if let Noise::Gaussian { sigma } = self.noise {
            if !(sigma >= 0.0 && sigma.is_finite()) {
                return param(format!("noise sigma must be non-negative, got {sigma}"));
            }
        }
        let (model_dim, max_norm) = match &self.model {
            ActionModel::FixedSet(set) => {
                if set.is_empty() {
                    return param("fixed action set is empty");
                }
                (set.dim(), set.max_norm())
            }
            ActionModel::IidUnitSphere { count } => {
                if *count == 0 {
                    return param("sphere action model needs count >= 1");
                }
                (d, 1.0)
            }
            ActionModel::Adversarial(s) => {
                s.validate()?;
                (s.dim(), s.max_norm())
            }
        };
        if model_dim != d {
            return param(format!("actions have dimension {model_dim}, theta_star has {d}"));
        }
        if max_norm > self.action_norm + TOLERANCE {
            return param(format!(
                "action norm {max_norm} exceeds declared bound {}",
                self.action_norm
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum Perturbation {
    None,
    /// Per-index offsets for a fixed action set.
    Offsets(Vec<f64>),
    /// `eps · sign(⟨a, u⟩)`.
    Directional { u: Vec<f64>, eps: f64 },
}

impl Perturbation {
    fn value(&self, index: usize, action: &[f64]) -> f64 {
        match self {
            Perturbation::None => 0.0,
            Perturbation::Offsets(o) => o[index],
            Perturbation::Directional { u, eps } => {
                if dot(action, u) >= 0.0 {
                    *eps
                } else {
                    -*eps
                }
            }
        }
    }
}

/// A running linear bandit environment.
#[derive(Debug, Clone)]
pub struct LinearBanditEnv {
    spec: EnvSpec,
    perturbation: Perturbation,
    contexts: ChaCha8Rng,
    noise_rng: ChaCha8Rng,
    current: ActionSet,
    means: Vec<f64>,
    mu_star: f64,
    round: u64,
    std_normal: Normal,
}

impl LinearBanditEnv {
    pub fn new(spec: EnvSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut setup = substream(seed, Stream::EnvSetup);
        let perturbation = if spec.eps_star == 0.0 {
            Perturbation::None
        } else if let ActionModel::FixedSet(set) = &spec.model {
            let eps = spec.eps_star;
            Perturbation::Offsets(
                (0..set.len())
                    .map(|_| if setup.random::<bool>() { eps } else { -eps })
                    .collect(),
            )
        } else {
            let u = sphere_set(1, spec.dim(), &mut setup).row(0).to_vec();
            Perturbation::Directional {
                u,
                eps: spec.eps_star,
            }
        };
        let dim = spec.dim();
        Ok(Self {
            spec,
            perturbation,
            contexts: substream(seed, Stream::EnvContexts),
            noise_rng: substream(seed, Stream::EnvNoise),
            current: ActionSet {
                dim,
                data: Vec::new(),
            },
            means: Vec::new(),
            mu_star: f64::NEG_INFINITY,
            round: 0,
            std_normal: Normal::standard(),
        })
    }

    pub fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Produces the action set of round `t` and caches its means.
    pub fn emit_round(&mut self, t: u64) -> Result<&ActionSet> {
        if t == 0 {
            return param("rounds are numbered from 1");
        }
        self.current = match &self.spec.model {
            ActionModel::FixedSet(set) => set.clone(),
            ActionModel::IidUnitSphere { count } => sphere_set(*count, self.spec.dim(), &mut self.contexts),
            ActionModel::Adversarial(s) => s.generate(t),
        };
        self.means.clear();
        for i in 0..self.current.len() {
            let m = self.mean_of(i, self.current.row(i))?;
            self.means.push(m);
        }
        self.mu_star = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        self.round = t;
        Ok(&self.current)
    }

    /// Expected reward of `action` at position `index` of the current set.
    fn mean_of(&self, index: usize, action: &[f64]) -> Result<f64> {
        let linear = dot(action, &self.spec.theta_star) + self.perturbation.value(index, action);
        match self.spec.noise {
            Noise::Bernoulli => {
                if !(-TOLERANCE..=1.0 + TOLERANCE).contains(&linear) {
                    return Err(Error::Environment(format!(
                        "Bernoulli mean {linear} outside [0, 1]"
                    )));
                }
                Ok(linear.clamp(0.0, 1.0))
            }
            Noise::Gaussian { sigma } if self.spec.clip => Ok(clipped_normal_mean(linear, sigma, &self.std_normal)),
            Noise::Gaussian { .. } => Ok(linear),
        }
    }

    pub fn current(&self) -> &ActionSet {
        &self.current
    }

    /// Conditional means of the current set.
    pub fn means(&self) -> &[f64] {
        &self.means
    }

    /// Exact `max` of conditional means over the current set.
    pub fn optimal_value(&self) -> f64 {
        self.mu_star
    }

    /// Samples the reward of action `index` of the current set. Returns
    /// `(reward, conditional_mean)`.
    pub fn realize(&mut self, index: usize) -> Result<(f64, f64)> {
        let Some(&mean) = self.means.get(index) else {
            return Err(Error::Input(format!(
                "action index {index} outside current set of {}",
                self.means.len()
            )));
        };
        let reward = match self.spec.noise {
            Noise::Bernoulli => {
                if self.noise_rng.random::<f64>() < mean {
                    1.0
                } else {
                    0.0
                }
            }
            Noise::Gaussian { sigma } => {
                let linear = dot(self.current.row(index), &self.spec.theta_star)
                    + self.perturbation.value(index, self.current.row(index));
                let z: f64 = StandardNormal.sample(&mut self.noise_rng);
                let r = linear + sigma * z;
                if self.spec.clip {
                    r.clamp(0.0, 1.0)
                } else {
                    r
                }
            }
        };
        Ok((reward, mean))
    }

    pub fn round(&self) -> u64 {
        self.round
    }
}

/// `E[clip(X, 0, 1)]` for `X ~ N(mu, sigma²)`.
fn clipped_normal_mean(mu: f64, sigma: f64, std: &Normal) -> f64 {
    if sigma == 0.0 {
        return mu.clamp(0.0, 1.0);
    }
    let a = -mu / sigma;
    let b = (1.0 - mu) / sigma;
    let (pa, pb) = (std.cdf(a), std.cdf(b));
    mu * (pb - pa) + sigma * (std.pdf(a) - std.pdf(b)) + (1.0 - pb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn e(i: usize, d: usize) -> Vec<f64> {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        v
    }

    fn spec(model: ActionModel, theta: Vec<f64>, sigma: f64) -> EnvSpec {
        EnvSpec {
            theta_star: theta,
            model,
            noise: Noise::Gaussian { sigma },
            clip: false,
            eps_star: 0.0,
            action_norm: 1.0,
        }
    }

    #[test]
    fn fixed_set_is_constant() {
        let set = ActionSet::from_rows(&[e(0, 2), e(1, 2)]).unwrap();
        let mut env = LinearBanditEnv::new(spec(ActionModel::FixedSet(set.clone()), vec![1.0, 0.0], 0.1), 1).unwrap();
        assert_eq!(env.emit_round(1).unwrap(), &set);
        assert_eq!(env.emit_round(1_000_000).unwrap(), &set);
        assert_eq!(env.optimal_value(), 1.0);
    }

    #[test]
    fn alternating_schedule_depends_only_on_t() {
        let s = Schedule::Cycle(vec![
            ActionSet::from_rows(&[e(0, 2)]).unwrap(),
            ActionSet::from_rows(&[e(1, 2)]).unwrap(),
        ]);
        let m = ActionModel::Adversarial(s.clone());
        let mut a = LinearBanditEnv::new(spec(m.clone(), vec![0.3, 0.6], 0.0), 1).unwrap();
        let mut b = LinearBanditEnv::new(spec(m, vec![0.3, 0.6], 0.0), 99).unwrap();
        for t in [1, 2, 3, 10, 11] {
            let sa = a.emit_round(t).unwrap().clone();
            assert_eq!(&sa, b.emit_round(t).unwrap());
            assert_eq!(sa.row(0), e(((t - 1) % 2) as usize, 2).as_slice());
        }
        let h = Schedule::HashedSphere { count: 3, dim: 4, salt: 9 };
        assert_eq!(h.generate(17), h.generate(17));
        assert_ne!(h.generate(17), h.generate(18));
    }

    #[test]
    fn sphere_norms_are_one() {
        let mut env = LinearBanditEnv::new(spec(ActionModel::IidUnitSphere { count: 50 }, vec![0.5; 3], 0.1), 3).unwrap();
        for t in 1..20 {
            for r in env.emit_round(t).unwrap().rows() {
                assert!((norm(r) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noiseless_reward_is_inner_product() {
        let set = ActionSet::from_rows(&[e(0, 3)]).unwrap();
        let mut env = LinearBanditEnv::new(spec(ActionModel::FixedSet(set), vec![0.7, 0.1, 0.0], 0.0), 1).unwrap();
        env.emit_round(1).unwrap();
        assert_eq!(env.realize(0).unwrap(), (0.7, 0.7));
    }

    #[test]
    fn perturbation_is_bounded() {
        let mut s = spec(ActionModel::IidUnitSphere { count: 20 }, vec![0.3, -0.2, 0.1], 0.0);
        s.eps_star = 0.05;
        let mut env = LinearBanditEnv::new(s.clone(), 4).unwrap();
        for t in 1..50 {
            let set = env.emit_round(t).unwrap().clone();
            for (i, a) in set.rows().enumerate() {
                let gap = (env.means()[i] - dot(a, &s.theta_star)).abs();
                assert!(gap <= 0.05 + 1e-15);
            }
        }
        let set = ActionSet::from_rows(&[e(0, 3), e(1, 3), e(2, 3)]).unwrap();
        s.model = ActionModel::FixedSet(set);
        let mut env = LinearBanditEnv::new(s, 4).unwrap();
        env.emit_round(1).unwrap();
        for (i, m) in env.means().iter().enumerate() {
            assert!((m - [0.3, -0.2, 0.1][i]).abs() <= 0.05 + 1e-15);
        }
    }

    #[test]
    fn empirical_mean_matches_conditional_mean() {
        let set = ActionSet::from_rows(&[vec![0.6, 0.8]]).unwrap();
        let mut env = LinearBanditEnv::new(spec(ActionModel::FixedSet(set), vec![0.5, 0.25], 0.5), 8).unwrap();
        env.emit_round(1).unwrap();
        let n = 100_000;
        let mut sum = 0.0;
        let mut mean = 0.0;
        for _ in 0..n {
            let (r, m) = env.realize(0).unwrap();
            sum += r;
            mean = m;
        }
        assert!((sum / n as f64 - mean).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }

    #[test]
    fn clipped_mean_matches_monte_carlo() {
        let set = ActionSet::from_rows(&[vec![0.9]]).unwrap();
        let mut s = spec(ActionModel::FixedSet(set), vec![0.95], 0.3);
        s.clip = true;
        let mut env = LinearBanditEnv::new(s, 2).unwrap();
        env.emit_round(1).unwrap();
        let n = 200_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += env.realize(0).unwrap().0;
        }
        let m = env.means()[0];
        assert!(m < 0.855 && m > 0.7);
        assert!((sum / n as f64 - m).abs() < 4.0 * 0.3 / (n as f64).sqrt());
    }

    #[test]
    fn optimal_value_is_brute_force_max() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for seed in 0..20 {
            let theta: Vec<f64> = (0..5).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut env = LinearBanditEnv::new(spec(ActionModel::IidUnitSphere { count: 100 }, theta.clone(), 0.1), seed).unwrap();
            let set = env.emit_round(1).unwrap().clone();
            let brute = set.rows().map(|a| dot(a, &theta)).fold(f64::NEG_INFINITY, f64::max);
            assert_eq!(env.optimal_value(), brute);
            assert!(env.means().iter().all(|m| *m <= env.optimal_value()));
        }
        let single = ActionSet::from_rows(&[vec![0.2, 0.4]]).unwrap();
        let mut env = LinearBanditEnv::new(spec(ActionModel::FixedSet(single), vec![1.0, 1.0], 0.0), 0).unwrap();
        env.emit_round(1).unwrap();
        assert!((env.optimal_value() - 0.6).abs() < 1e-15);
    }

    #[test]
    fn rejects_oversized_actions() {
        let set = ActionSet::from_rows(&[vec![2.0, 0.0]]).unwrap();
        assert!(LinearBanditEnv::new(spec(ActionModel::FixedSet(set), vec![1.0, 0.0], 0.0), 0).is_err());
    }

    #[test]
    fn streams_reproduce() {
        let m = ActionModel::IidUnitSphere { count: 4 };
        let mut a = LinearBanditEnv::new(spec(m.clone(), vec![0.1, 0.2], 1.0), 5).unwrap();
        let mut b = LinearBanditEnv::new(spec(m, vec![0.1, 0.2], 1.0), 5).unwrap();
        for t in 1..100 {
            assert_eq!(a.emit_round(t).unwrap(), b.emit_round(t).unwrap());
            assert_eq!(a.realize(0).unwrap(), b.realize(0).unwrap());
        }
    }
}
